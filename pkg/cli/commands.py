import logging
from pathlib import Path

from cchardy.systems import builtin_names, default_r0
from services import (
    ConfigError,
    ConfigIOError,
    ConfigLoader,
    ExperimentError,
    run_experiment,
    write_report,
)


class ExperimentCLI:
    SYSTEM_DESCRIPTIONS = {
        "euclidean3": "Coordinate fields of R^3 (Q = 3)",
        "grushin-paper-example": "X1 = d1, X2 = d2, X3 = x1 d3 on R^3 (Q(0) = 4, Q(x) = 3 off x1 = 0)",
        "heisenberg1": "First Heisenberg group, H-type with k = q = 1 (Q = 4)",
        "htype(k,q)": "Heisenberg-type group with 2k horizontal and q central directions (Q = 2k + 2q)",
    }

    def __init__(self, args):
        self.args = args
        self.loader = ConfigLoader()

    def run(self) -> int:
        logging.basicConfig(
            level=logging.DEBUG if self.args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )

        if self.args.command == "list-systems":
            self._print_systems()
            return 0
        if self.args.command == "validate":
            return self._run_validate()
        if self.args.command == "run":
            return self._run_experiment()
        return 1

    def _print_systems(self) -> None:
        """Print the built-in systems."""
        print("Available systems:")
        print("-" * 60)
        for name in builtin_names():
            desc = self.SYSTEM_DESCRIPTIONS.get(name, "")
            r0 = f"r0={default_r0(name):g}" if "(" not in name else ""
            print(f"  {name:24s} {r0:8s} - {desc}")

    def _run_validate(self) -> int:
        try:
            diagnostics = self.loader.diagnose(self.args.config)
        except ConfigIOError as e:
            print(f"Error: {e}")
            return 2
        except ConfigError as e:
            print(f"Error: {e}")
            return 1

        if not diagnostics:
            print(f"[+] {self.args.config}: no problems found")
            return 0
        print(f"[-] {self.args.config}: {len(diagnostics)} problem(s)")
        for diagnostic in diagnostics:
            print(f"    {diagnostic}")
        return 1

    def _run_experiment(self) -> int:
        overrides = {"out": self.args.out, "seed": self.args.seed, "threads": self.args.threads}
        try:
            config = self.loader.load(self.args.config, overrides)
        except ConfigError as e:
            print(f"Error loading config: {e}")
            return 2

        self._print_header(f"EXPERIMENT {config.name.upper()} ({config.system_label})")
        print(f"[+] Config: {config.source}")
        print(f"[+] Seed: {config.seed}, threads: {config.threads}\n")

        try:
            result = run_experiment(config)
        except ExperimentError as e:
            print(f"Error: {e}")
            return 1

        files = write_report(config.out, config, result)
        for line in result.summary:
            print(f"[+] {line}")
        print()
        for name, ok in result.checks.items():
            print(f"[{'+' if ok else '-'}] {name}: {'pass' if ok else 'FAIL'}")
        print(f"\n[+] Wrote {len(files)} files to {Path(config.out).resolve()}")
        return 0 if result.passed else 1

    @staticmethod
    def _print_header(title: str) -> None:
        print("=" * 60)
        print(title)
        print("=" * 60 + "\n")
