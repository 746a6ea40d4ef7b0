"""
Markdown report tables with YAML front matter.

The comparison report is a pipe table per artifact; front matter carries
the table metadata (run settings, damping index) for downstream tooling.
"""

from typing import Any, Dict, List, Mapping, Optional, Sequence

import yaml

from .export_handler_base import (
    BaseExporter, ExportContext, ExportError, ExportResult, ResultTable, format_cell,
)


class MarkdownExportError(ExportError):
    """Exception raised for Markdown export related errors."""
    pass


def _escape(text: str) -> str:
    return text.replace('|', '\\|').replace('\n', ' ')


def format_markdown_table(table: ResultTable, float_format: str = '.6g') -> str:
    """GitHub pipe table; numbers right-aligned."""
    numeric = [
        all(isinstance(row[k], (int, float)) and not isinstance(row[k], bool) for row in table.rows)
        for k in range(len(table.columns))
    ] if table.rows else [False] * len(table.columns)
    header = "| " + " | ".join(_escape(c) for c in table.columns) + " |"
    rule = "|" + "|".join("---:" if n else "---" for n in numeric) + "|"
    lines = [header, rule]
    for row in table.rows:
        lines.append("| " + " | ".join(_escape(format_cell(v, float_format)) for v in row) + " |")
    return "\n".join(lines)


class MarkdownExporter(BaseExporter):
    """Writes a table as a titled Markdown document."""

    def __init__(
        self,
        context: ExportContext,
        include_front_matter: bool = True,
        float_format: str = '.6g',
    ):
        super().__init__(context)
        self.include_front_matter = include_front_matter
        self.float_format = float_format

    def _get_format_name(self) -> str:
        return "Markdown"

    def _get_file_extension(self) -> str:
        return "md"

    def front_matter(self, table: ResultTable) -> str:
        data: Dict[str, Any] = {'table': table.name, 'rows': len(table), 'run_id': self.context.run_id}
        data.update(table.metadata)
        content = yaml.dump(data, default_flow_style=False, allow_unicode=True, sort_keys=True)
        return f"---\n{content}---\n"

    def render(self, table: ResultTable) -> str:
        parts = []
        if self.include_front_matter:
            parts.append(self.front_matter(table))
        parts.append(f"# {table.title or table.name}\n")
        parts.append(format_markdown_table(table, self.float_format) + "\n")
        return "\n".join(parts)

    def render_report(self, tables: Sequence[ResultTable], title: str) -> str:
        """Several tables under one heading, one section each."""
        if not tables:
            raise MarkdownExportError("No tables to report")
        parts = [f"# {title}\n"]
        for table in tables:
            parts.append(f"## {table.title or table.name}\n")
            parts.append(format_markdown_table(table, self.float_format) + "\n")
        return "\n".join(parts)

    def export_report(self, tables: Sequence[ResultTable], title: str, name: str = 'report') -> ExportResult:
        """Write ``render_report`` output to ``<name>.md``."""
        output_path = self.context.output_directory / f"{self._sanitize_filename(name)}.md"
        try:
            content = self.render_report(tables, title)
            output_path.parent.mkdir(parents=True, exist_ok=True)
            output_path.write_text(content, encoding='utf-8')
        except (OSError, MarkdownExportError) as e:
            self.context.log_error(f"Markdown report failed: {e}")
            return ExportResult.failure_result(f"Markdown report failed: {e}", metadata={'table': name})
        self.context.log_info(f"Wrote {output_path.name} ({len(tables)} tables)")
        return ExportResult.success_result(
            output_path, metadata={'format': 'md', 'tables': [t.name for t in tables]}
        )


def pivot_table(
    records: Sequence[Mapping[str, Any]],
    row_key: str,
    column_key: str,
    value_key: str,
    name: str,
    title: Optional[str] = None,
    row_order: Optional[Sequence[str]] = None,
    column_order: Optional[Sequence[str]] = None,
) -> ResultTable:
    """
    Cross-tabulate one value (e.g. iterations as method x case).

    Missing combinations are left blank.

    Raises:
        MarkdownExportError: Duplicate (row, column) pairs
    """
    cells: Dict[Any, Any] = {}
    rows_seen: List[Any] = []
    cols_seen: List[Any] = []
    for record in records:
        r, c = record[row_key], record[column_key]
        if (r, c) in cells:
            raise MarkdownExportError(f"Duplicate entry for {row_key}={r}, {column_key}={c}")
        cells[(r, c)] = record[value_key]
        if r not in rows_seen:
            rows_seen.append(r)
        if c not in cols_seen:
            cols_seen.append(c)
    row_labels = [r for r in (row_order or rows_seen) if r in rows_seen]
    col_labels = [c for c in (column_order or cols_seen) if c in cols_seen]
    rows = [[r] + [cells.get((r, c)) for c in col_labels] for r in row_labels]
    return ResultTable(name=name, columns=[row_key] + [str(c) for c in col_labels], rows=rows, title=title)
