"""
Communication-overhead accounting.

bytes per instance = L_x · d · bytes_per_symbol, in exact integers. A fused
multi-modal task sends one row; the unfused alternative sends every modality's
rows plus the task row, so the fused/unfused ratio is 1 / (Σ L_m + 1).
"""

from fractions import Fraction
from typing import Dict, List, Sequence

import pandas as pd
from pydantic import computed_field

from semcomm_common.base_model import FrozenModel
from semcomm_common.enums import TransmissionMode
from semcomm_common.exceptions import ConfigurationError
from semcomm_model.config import ModelConfig, TaskSpec

SYMBOL_BITS = (8, 16, 32)

# Σ L_m + 1 for the two multi-modal workloads of the overhead comparison
OVERHEAD_PRESETS: Dict[str, int] = {"vqa_like": 50, "mmimdb_like": 31}


class OverheadReport(FrozenModel):
    task: str
    modalities: str
    transmitted_rows: int
    unfused_rows: int
    symbol_width: int
    bytes_per_symbol: int

    @computed_field  # type: ignore[prop-decorator]
    @property
    def fused_bytes(self) -> int:
        return self.transmitted_rows * self.symbol_width * self.bytes_per_symbol

    @computed_field  # type: ignore[prop-decorator]
    @property
    def unfused_bytes(self) -> int:
        return self.unfused_rows * self.symbol_width * self.bytes_per_symbol

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.fused_bytes, self.unfused_bytes)


def bytes_per_symbol(symbol_bits: int) -> int:
    if symbol_bits not in SYMBOL_BITS:
        raise ConfigurationError(f"symbol bits must be one of {SYMBOL_BITS}, got {symbol_bits}", field="symbol_bits")
    return symbol_bits // 8


def overhead_from_lengths(
    name: str, lengths: Sequence[int], d: int, symbol_bits: int = 32, modalities: str = ""
) -> OverheadReport:
    if len(lengths) == 1:
        # single-modal features bypass fusion
        rows = unfused = lengths[0]
    else:
        rows, unfused = 1, sum(lengths) + 1
    return OverheadReport(
        task=name,
        modalities=modalities,
        transmitted_rows=rows,
        unfused_rows=unfused,
        symbol_width=d,
        bytes_per_symbol=bytes_per_symbol(symbol_bits),
    )


def overhead(
    config: ModelConfig,
    task: TaskSpec,
    symbol_bits: int = 32,
    mode: TransmissionMode = TransmissionMode.FUSED,
) -> OverheadReport:
    lengths = [config.sequence_length(m) for m in task.modalities]
    report = overhead_from_lengths(
        task.name, lengths, config.d, symbol_bits, "+".join(m.value for m in task.modalities)
    )
    if mode is TransmissionMode.CONCAT:
        return report.model_copy(update={"transmitted_rows": report.unfused_rows})
    return report


def preset_reports(d: int = 32, symbol_bits: int = 32) -> List[OverheadReport]:
    """Reports for workloads given only by their total pre-fusion length Σ L_m + 1."""
    return [
        OverheadReport(
            task=f"preset_{name}",
            modalities="",
            transmitted_rows=1,
            unfused_rows=total,
            symbol_width=d,
            bytes_per_symbol=bytes_per_symbol(symbol_bits),
        )
        for name, total in OVERHEAD_PRESETS.items()
    ]


def overhead_frame(reports: Sequence[OverheadReport]) -> pd.DataFrame:
    records = []
    for r in reports:
        record = r.model_dump()
        record["ratio"] = f"{r.ratio.numerator}/{r.ratio.denominator}"
        records.append(record)
    columns = [
        "task",
        "modalities",
        "transmitted_rows",
        "unfused_rows",
        "symbol_width",
        "bytes_per_symbol",
        "fused_bytes",
        "unfused_bytes",
        "ratio",
    ]
    return pd.DataFrame(records, columns=columns)
