from typing import List, Optional


def generate_table(
    headers: List[List[str]],
    data: List[List[str]],
    alignments: Optional[List[str]] = None,
    horizontal_lines: Optional[List[int]] = None
) -> str:
    """

    Renders a markdown table. A positive entry in horizontal_lines draws a
    separator below the corresponding data row.

    >>> print(generate_table([["split", "smape"]], [["Monthly", "12.500"], ["all", "12.500"]], horizontal_lines=[1, 0]))
    | split   |  smape |
    | ------- | ------ |
    | Monthly | 12.500 |
    | ------- | ------ |
    | all     | 12.500 |

    """
    assert len(headers), "got no headers"
    assert len(set(len(header) for header in headers)) == 1, "all headers must have the same length"
    num_columns = len(headers[0])
    assert all(num_columns == len(row) for row in data), \
        f"header has length {num_columns}, but data rows have lengths {[len(row) for row in data]}"

    if alignments is None:
        alignments = ["left"] + ["right"] * (num_columns - 1)
    if horizontal_lines is None:
        horizontal_lines = [0] * len(data)

    # markdown needs at least three dashes per column
    widths = [
        max([3] + [len(row[i]) for row in headers] + [len(row[i]) for row in data])
        for i in range(num_columns)
    ]
    separator = "| " + " | ".join("-" * w for w in widths) + " |"

    lines = [_row(header, alignments, widths) for header in headers]
    lines.append(separator)
    for row, line in zip(data, horizontal_lines):
        lines.append(_row(row, alignments, widths))
        if line > 0:
            lines.append(separator)
    return "\n".join(lines)


def _row(cells: List[str], alignments: List[str], widths: List[int]) -> str:
    formatted = []
    for cell, alignment, width in zip(cells, alignments, widths):
        if alignment == "left":
            formatted.append(cell.ljust(width))
        elif alignment == "right":
            formatted.append(cell.rjust(width))
        else:
            formatted.append(cell.center(width))
    return "| " + " | ".join(formatted) + " |"
