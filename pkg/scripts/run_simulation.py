#!/usr/bin/env python3
"""
Прогон симулятора без установки пакета: те же подкоманды, что у `layerbatch`.

    python scripts/run_simulation.py simulate --scheduler ours-time --rate 200 --seed 7 --out run.csv
"""
import sys
from pathlib import Path

# Add project root
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))


def main():
    from layerbatch.cli import main as cli_main

    return cli_main(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
