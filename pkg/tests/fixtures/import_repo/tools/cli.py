import argparse
from tools import runner as r
import tools.runner


def main():
    return r.run()
