import shutil

from setuptools import setup, find_packages

import rcdopt

VERSION = rcdopt.__version__

# 复制配置文件到项目目录下
shutil.rmtree('./rcdopt/configs/', ignore_errors=True)
shutil.copytree('./configs/', './rcdopt/configs/')


def readme():
    with open('README.md', encoding='utf-8') as f:
        content = f.read()
    return content


def parse_requirements():
    with open('./requirements.txt', encoding="utf-8") as f:
        requirements = f.readlines()
    return requirements


if __name__ == "__main__":
    setup(
        name='rcdopt',
        packages=find_packages(exclude=['tests']),
        package_data={'': ['configs/*', 'configs/manifests/*']},
        version=VERSION,
        install_requires=parse_requirements(),
        extras_require={'test': ['pytest>=7.0']},
        entry_points={'console_scripts': ['rcdopt=rcdopt.cli:main']},
        description='Random coordinate descent for composite problems with linear coupled constraints',
        long_description=readme(),
        long_description_content_type='text/markdown',
        keywords=['optimization', 'coordinate descent', 'svm'],
        classifiers=[
            'Intended Audience :: Science/Research',
            'License :: OSI Approved :: Apache Software License',
            'Operating System :: OS Independent',
            'Natural Language :: Chinese (Simplified)',
            'Programming Language :: Python :: 3',
            'Programming Language :: Python :: 3.8',
            'Programming Language :: Python :: 3.9',
            'Programming Language :: Python :: 3.10',
            'Topic :: Scientific/Engineering :: Mathematics'
        ],
        license='Apache License 2.0',
        ext_modules=[])
    shutil.rmtree('./rcdopt/configs/', ignore_errors=True)
