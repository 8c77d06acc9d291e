import numpy as np

from rcdopt.utils.errors import ConfigError

# 所有随机数都来自PCG64，一个seed对应一个SeedSequence：
#   stream 0: 坐标对/元组的抽样
#   stream 1: 重抽样（秩亏元组）以及幂迭代的初始向量
#   stream 2: 问题生成器
SAMPLING_STREAM = 0
AUX_STREAM = 1
GENERATOR_STREAM = 2
NUM_STREAMS = 3


def make_streams(seed):
    """根据64位seed派生互相独立的随机数流

    :param seed: 非负整数
    :return: 长度为NUM_STREAMS的np.random.Generator列表
    """
    seed = int(seed)
    if seed < 0 or seed >= 2 ** 64:
        raise ConfigError(f'seed必须在[0, 2^64)之间，当前为：{seed}')
    children = np.random.SeedSequence(seed).spawn(NUM_STREAMS)
    return [np.random.Generator(np.random.PCG64(child)) for child in children]


def make_generator(seed, stream=SAMPLING_STREAM):
    return make_streams(seed)[stream]
