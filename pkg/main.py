#!/usr/bin/env python3

import sys

from cli import ExperimentCLI, create_argument_parser


def main(argv=None) -> int:
    parser = create_argument_parser()
    args = parser.parse_args(argv)

    cli = ExperimentCLI(args)
    return cli.run()


if __name__ == "__main__":
    sys.exit(main())
