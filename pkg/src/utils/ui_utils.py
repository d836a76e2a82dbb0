import io

from rich.console import Console
from rich.table import Table
from rich import box
from rich.markup import escape
from typing import Any, Dict, List

from models.domain_models import TableGrid, TableKind

error_console = Console(stderr=True)

MONEY_KEYS = ("limit", "balance", "profit", "lower", "upper", "gap", "undershoot", "expected_min")
PROBABILITY_KEYS = ("decline", "frequency", "probability", "ks_p")


class UIHelper:
    @staticmethod
    def display_error(message: str) -> None:
        """Display an error message on stderr."""
        error_console.print(f"[red]{escape(message)}[/red]", highlight=False)

    @staticmethod
    def display_warning(message: str) -> None:
        """Display a warning message on stderr."""
        error_console.print(f"[yellow]{escape(message)}[/yellow]", highlight=False)

    @staticmethod
    def format_value(key: str, value: Any) -> str:
        """Money to 2 decimals, probabilities to 4, anything else as is."""
        if value is None:
            return "n/a"
        if isinstance(value, bool) or not isinstance(value, float):
            return str(value)
        if value != value:
            return "NaN"
        if any(k in key for k in PROBABILITY_KEYS):
            return f"{value:.4f}"
        if any(k in key for k in MONEY_KEYS):
            return f"{value:.2f}"
        return f"{value:.6g}"

    @staticmethod
    def create_table(title: str, columns: List[str], rows: List[List[Any]]) -> Table:
        """Create a rich table with the given data."""
        table = Table(title=title, box=box.ROUNDED)

        for col in columns:
            table.add_column(col)

        for row in rows:
            table.add_row(*[str(cell) for cell in row])

        return table

    @staticmethod
    def key_value_table(title: str, data: Dict[str, Any]) -> Table:
        rows = [[key, UIHelper.format_value(key, value)] for key, value in data.items()]
        return UIHelper.create_table(title, ["Field", "Value"], rows)

    @staticmethod
    def rows_table(title: str, rows: List[Dict[str, Any]]) -> Table:
        columns = list(rows[0].keys()) if rows else []
        body = [[UIHelper.format_value(c, row.get(c)) for c in columns] for row in rows]
        return UIHelper.create_table(title, columns, body)

    @staticmethod
    def grid_table(grid: TableGrid) -> Table:
        key = "decline" if grid.kind is TableKind.DECLINE else "limit"
        columns = ["lambda \\ 1/mu"] + [f"{m:g}" for m in grid.mean_marks]
        rows = [[f"{lam:g}"] + [UIHelper.format_value(key, v) for v in row]
                for lam, row in zip(grid.arrival_rates, grid.values)]
        return UIHelper.create_table(f"{grid.kind.value} limits", columns, rows)

    @staticmethod
    def render_text(tables: List[Table]) -> str:
        """Render tables to plain text."""
        recorder = Console(record=True, width=120, file=io.StringIO())
        for table in tables:
            recorder.print(table)
        return recorder.export_text()
