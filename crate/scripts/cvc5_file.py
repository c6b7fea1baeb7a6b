#!/usr/bin/env python3
"""Run an SMT-LIB 2 file through the cvc5 Python bindings.

Usage: cvc5_file.py [--option[=value] ...] FILE

Options are passed to the solver as in the cvc5 binary, e.g. --sets-exp.
"""
import sys

import cvc5


def main(argv):
    if not argv:
        sys.stderr.write(__doc__)
        return 2
    *opts, path = argv
    tm = cvc5.TermManager()
    solver = cvc5.Solver(tm)
    for opt in opts:
        name, _, value = opt.lstrip("-").partition("=")
        solver.setOption(name, value or "true")
    sm = cvc5.SymbolManager(tm)
    parser = cvc5.InputParser(solver, sm)
    parser.setFileInput(cvc5.InputLanguage.SMT_LIB_2_6, path)
    while True:
        cmd = parser.nextCommand()
        if cmd.isNull():
            break
        out = cmd.invoke(solver, sm)
        if out:
            sys.stdout.write(out if out.endswith("\n") else out + "\n")
            sys.stdout.flush()
    return 0


if __name__ == "__main__":
    try:
        sys.exit(main(sys.argv[1:]))
    except BrokenPipeError:
        sys.exit(1)
