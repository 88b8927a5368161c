# __file__: conftest.py
#
# __brief__: Pytest configuration: test ordering and rich progress output.

import os
# =========
import sys

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))
# =========

from rich.console import Console
from rich.theme import Theme

custom_theme = Theme(
    {
        "heading": "bold bright_cyan",
        "test_name": "italic green",
        "skip": "dim yellow",
        "fail": "bold bright_red",
    }
)
console = Console(theme=custom_theme)


def pytest_collection_modifyitems(config, items):
    """Run exact units first, then the float layer, then the CLI.

    Args:
        config (pytest.Config): config object
        items (list): collected test items
    """
    numeric = [item for item in items if "verify" in item.keywords and "system" not in item.keywords]
    sys_tests = [item for item in items if "system" in item.keywords]
    unit_tests = [item for item in items if item not in numeric and item not in sys_tests]

    for heading, group in (
        ("🛠️ --- Exact Unit Tests --- 🧪", unit_tests),
        ("📈 --- Numeric Tests --- 🧮", numeric),
        ("⚙️ --- System Tests --- 🚀", sys_tests),
    ):
        if group:
            console.print(f"[heading]\n{heading}[/heading]")
            for item in group:
                _display_test_item(item)

    items[:] = unit_tests + numeric + sys_tests


def pytest_runtest_logreport(report):
    if report.when == "call":
        name = report.nodeid.split("::")[-1]
        if report.passed:
            console.print(f"[test_name]✅ {name}[/test_name]", end="  ")
        elif report.skipped:
            console.print(f"[skip]🟡 Skipped: {name}[/skip]", end="  ")
        elif report.failed:
            console.print(f"[fail]❌ Failed: {name}[/fail]", end="  ")


def _display_test_item(item):
    file_name, *_, test_name = item.nodeid.split("::")
    console.print(f"  [test_name]📄 {file_name} :: {test_name}[/test_name]")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Colored pass/skip/fail counts after the run.

    Args:
        terminalreporter (TerminalReporter): reporter object
        exitstatus (int): exit status
        config (pytest.Config): config object
    """
    console.print("[heading]\n📊 --- Test Summary --- 📊[/heading]")
    stats = terminalreporter.stats
    if stats.get("passed"):
        console.print(f"[green]✅ Passed:[/green] {len(stats['passed'])}", end="  ")
    if stats.get("skipped"):
        console.print(f"[yellow]🟡 Skipped:[/yellow] {len(stats['skipped'])}", end="  ")
    if stats.get("failed"):
        console.print(f"[bold red]❌ Failed:[/bold red] {len(stats['failed'])}", end="  ")
    if stats.get("error"):
        console.print(f"[bold bright_red]🚨 Errors:[/bold bright_red] {len(stats['error'])}")

    console.print("\n[heading]🔚 --- End of Test Report --- 🔚\n\n[/heading]")
