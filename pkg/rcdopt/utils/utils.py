import os

import yaml
from loguru import logger

from rcdopt.utils.errors import ConfigError


def print_arguments(args=None, configs=None, title=None):
    if args:
        logger.info("----------- 额外配置参数 -----------")
        for arg, value in sorted(vars(args).items()):
            logger.info("%s: %s" % (arg, value))
        logger.info("------------------------------------------------")
    if configs:
        title = title if title else "配置文件参数"
        logger.info(f"----------- {title} -----------")
        for arg, value in sorted(configs.items()):
            if isinstance(value, dict):
                logger.info(f"{arg}:")
                for a, v in sorted(value.items()):
                    if isinstance(v, dict):
                        logger.info(f"\t{a}:")
                        for a1, v1 in sorted(v.items()):
                            logger.info("\t\t%s: %s" % (a1, v1))
                    else:
                        logger.info("\t%s: %s" % (a, v))
            else:
                logger.info("%s: %s" % (arg, value))
        logger.info("------------------------------------------------")


def strtobool(value):
    value = str(value).strip().lower()
    if value in ('y', 'yes', 't', 'true', 'on', '1'):
        return True
    if value in ('n', 'no', 'f', 'false', 'off', '0'):
        return False
    raise ValueError(f"无法识别的布尔值：{value}")


def add_arguments(argname, type, default, help, argparser, **kwargs):
    type = strtobool if type == bool else type
    argparser.add_argument("--" + argname,
                           default=default,
                           type=type,
                           help=help + ' 默认: %(default)s.',
                           **kwargs)


class Dict(dict):
    __setattr__ = dict.__setitem__
    __getattr__ = dict.__getitem__


def dict_to_object(dict_obj):
    if not isinstance(dict_obj, dict):
        return dict_obj
    inst = Dict()
    for k, v in dict_obj.items():
        if isinstance(v, list):
            inst[k] = [dict_to_object(i) for i in v]
        else:
            inst[k] = dict_to_object(v)
    return inst


# 根据a的类型，将b转换为相应的类型
def convert_string_based_on_type(a, b):
    # bool是int的子类，需要先判断
    if isinstance(a, bool):
        b = b.lower() == 'true'
    elif isinstance(a, int):
        try:
            b = int(b)
        except ValueError:
            logger.error("无法将字符串转换为整数")
    elif isinstance(a, float):
        try:
            b = float(b)
        except ValueError:
            logger.error("无法将字符串转换为浮点数")
    elif isinstance(a, str):
        return b
    else:
        try:
            b = yaml.safe_load(b)
        except yaml.YAMLError:
            logger.exception("无法将字符串转换为其他类型，将忽略该参数类型转换")
    return b


def load_configs(configs, default_dir=None):
    """读取配置文件

    :param configs: 配置文件路径，配置名称（如"rcd"，使用默认配置文件），或者已经读取的字典
    :param default_dir: 默认配置文件所在目录，为None时使用包内的configs目录
    :return: 可用属性访问的配置字典
    """
    if isinstance(configs, str):
        if default_dir is None:
            # 获取当前程序绝对路径
            absolute_path = os.path.dirname(os.path.dirname(__file__))
            default_dir = os.path.join(absolute_path, 'configs')
        # 获取默认配置文件路径
        config_path = os.path.join(default_dir, f"{configs}.yml")
        if not os.path.exists(config_path):
            # 开发环境下配置文件在仓库根目录
            repo_configs = os.path.join(os.path.dirname(os.path.dirname(os.path.dirname(__file__))), 'configs')
            config_path = os.path.join(repo_configs, f"{configs}.yml")
        configs = config_path if os.path.exists(config_path) else configs
        if not os.path.exists(configs):
            raise ConfigError(f"配置文件不存在：{configs}")
        with open(configs, 'r', encoding='utf-8') as f:
            configs = yaml.load(f.read(), Loader=yaml.FullLoader)
    return dict_to_object(configs)


def apply_overwrites(configs, overwrites):
    """覆盖配置文件中的参数

    :param configs: dict_to_object得到的配置
    :param overwrites: 形如"solver_conf.epsilon=1e-6"，多个用逗号隔开
    """
    if not overwrites:
        return configs
    overwrites = overwrites.split(",")
    for overwrite in overwrites:
        try:
            keys, value = overwrite.strip().split("=")
        except ValueError:
            raise ConfigError(f"无法解析的覆盖参数：{overwrite}") from None
        attrs = keys.split('.')
        current_level = configs
        for attr in attrs[:-1]:
            if not isinstance(current_level, dict) or attr not in current_level:
                raise ConfigError(f"配置中没有参数：{keys}")
            current_level = current_level[attr]
        before_value = current_level.get(attrs[-1], None)
        setattr(current_level, attrs[-1], convert_string_based_on_type(before_value, value))
    return configs
