"""Archival benchmark runner: summary CSV plus every per-repetition solve report."""

import json
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional

import click

from jumpbem.config import load_config
from jumpbem.exceptions import JumpBEMError
from jumpbem.pipeline import Pipeline


@click.command()
@click.option("--config", "-c", type=click.Path(exists=True, path_type=Path), help="Path to configuration file")
@click.option("--levels", help="Comma-separated icosphere levels")
@click.option("--repetitions", type=click.IntRange(min=1), help="Solves per method and level")
def main(config: Optional[Path], levels: Optional[str], repetitions: Optional[int]) -> None:
    """Run the benchmark and archive raw timings under data/bench/<timestamp>/."""
    try:
        settings = load_config(config)
        pipeline = Pipeline(settings)

        stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
        archive = Path(settings.output.data_dir) / "bench" / stamp
        archive.mkdir(parents=True, exist_ok=True)

        parsed = [int(v) for v in levels.split(",")] if levels else None
        settings.apply_overrides({"benchmark.levels": parsed, "benchmark.repetitions": repetitions})
        result = pipeline.bench(output_path=archive / "summary.csv")
        with open(archive / "raw.json", "w") as f:
            json.dump(
                {"config": settings.model_dump(), "runs": result.raw},
                f,
                indent=2,
                sort_keys=True,
            )

        print("✅ Benchmark completed successfully!")
        for comparison in result.comparisons:
            print(
                f"📊 N={comparison.n}: measured {comparison.measured_ratio:.3f}, "
                f"modeled {comparison.modeled_ratio:.3f}, reference {comparison.reference_ratio:.3f}"
            )
        print(f"📂 Output saved to: {archive}")

    except JumpBEMError as e:
        print(f"❌ Benchmark failed: {e}")
        sys.exit(e.exit_code)
    except ValueError as e:
        print(f"❌ Benchmark failed: {e}")
        sys.exit(2)


if __name__ == "__main__":
    main()
