import argparse
import sys

from rcdopt.cli import add_solve_arguments, run_solve, run_command
from rcdopt.utils.utils import print_arguments

parser = add_solve_arguments(argparse.ArgumentParser(description=__doc__))
args = parser.parse_args()
print_arguments(args=args)

sys.exit(run_command(run_solve, args))
