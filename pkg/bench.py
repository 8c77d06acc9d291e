import argparse
import sys

from rcdopt.cli import add_bench_arguments, run_bench, run_command
from rcdopt.utils.utils import print_arguments

parser = add_bench_arguments(argparse.ArgumentParser(description=__doc__))
args = parser.parse_args()
print_arguments(args=args)

sys.exit(run_command(run_bench, args))
