"""
File formats: result CSV and JSON summaries, network edge lists and
balance-sheet dumps, plus the validating reader for result CSVs.
"""

import csv
import json
import logging
from typing import Dict, Iterable, List, Optional, Tuple

try:
    from ..errors import ResultFormatError
    from ..netgen import WeightedNetwork
    from ..balsheet import BalanceSheets
except ImportError:
    # Fallback for direct execution
    from errors import ResultFormatError
    from netgen import WeightedNetwork
    from balsheet import BalanceSheets

logger = logging.getLogger(__name__)

F_SWEEP_COLUMNS = ["f_or_q", "crisis_F", "crisis_F_shadow", "crisis_F_regulated", "baseline_b", "baseline_c"]
Q_SWEEP_COLUMNS = ["f_or_q", "crisis_F", "crisis_F_shadow", "crisis_F_regulated", "R_total", "R_shadow", "R_regulated"]
RESULT_SCHEMAS = (F_SWEEP_COLUMNS, Q_SWEEP_COLUMNS)
SHEET_COLUMNS = ["bank", "class", "a", "l", "e", "c", "b", "d", "gamma"]


def format_value(value) -> str:
    """Stable text form: blanks for undefined values, 10 significant digits for floats."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".10g")


def write_result_csv(path: str, columns: List[str], rows: Iterable[Dict]):
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(col)) for col in columns])
    logger.info(f"Wrote result CSV: {path}")


def write_json(path: str, payload: Dict):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, indent=2, ensure_ascii=False, default=str)
    logger.info(f"Wrote JSON: {path}")


def read_result_csv(path: str) -> Tuple[List[str], List[Dict[str, Optional[float]]]]:
    """Parse a result CSV; raises ResultFormatError with the offending line number."""
    with open(path, 'r', encoding='utf-8', newline='') as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ResultFormatError("file is empty", line=1)
        header = [h.strip() for h in header]
        if header not in RESULT_SCHEMAS:
            raise ResultFormatError(f"unexpected header {header}", line=1)

        rows = []
        for line_number, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise ResultFormatError(f"expected {len(header)} fields, got {len(record)}", line=line_number)
            row = {}
            for column, text in zip(header, record):
                text = text.strip()
                if text == "":
                    if column == "f_or_q":
                        raise ResultFormatError("missing f_or_q value", line=line_number)
                    row[column] = None
                    continue
                try:
                    row[column] = float(text)
                except ValueError:
                    raise ResultFormatError(f"non-numeric {column} value {text!r}", line=line_number)
            rows.append(row)

    if not rows:
        raise ResultFormatError("no data rows", line=2)
    return header, rows


def write_edge_list(network: WeightedNetwork, path: str):
    """Edge list `creditor,debtor,weight` under a `# N=.. classes=.. layers=..` header."""
    topology = network.topology
    classes = ",".join(c.value for c in topology.bank_class)
    layers = ",".join(str(int(layer)) for layer in topology.layer)
    rows, cols = topology.adjacency.nonzero()
    with open(path, 'w', encoding='utf-8') as f:
        f.write(f"# N={topology.n_banks} classes={classes} layers={layers}\n")
        for creditor, debtor in zip(rows, cols):
            f.write(f"{creditor},{debtor},{format(float(network.weights[creditor, debtor]), '.17g')}\n")
    logger.info(f"Wrote {len(rows)} edges to {path}")


def write_sheets_csv(sheets: BalanceSheets, network: WeightedNetwork, path: str):
    classes = network.topology.bank_class
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SHEET_COLUMNS)
        for index, sheet in enumerate(sheets):
            writer.writerow([
                index, classes[index].value,
                *(format(v, ".17g") for v in (
                    sheet.assets, sheet.interbank_loans, sheet.external_assets, sheet.equity,
                    sheet.interbank_borrowings, sheet.deposits, sheet.equity_ratio,
                )),
            ])
    logger.info(f"Wrote {len(sheets)} balance sheets to {path}")
