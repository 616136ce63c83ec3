"""Run the acceptance criteria outside pytest and print one line per criterion."""
import runpy
from pathlib import Path

if __name__ == "__main__":
    runpy.run_path(str(Path(__file__).resolve().parents[1] / "tests" / "test_acceptance.py"), run_name="__main__")
