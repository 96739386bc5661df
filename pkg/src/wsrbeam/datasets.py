"""Dataset files: one JSON header line, then one JSON record per sample.

Everything is UTF-8 text; complex numbers are stored as [re, im] pairs of
64-bit floats, which round-trip losslessly through JSON. Channel samples and
optional solver solutions (reduced-space, phase-rotated beamformers) live in
the same record.
"""

import json
from dataclasses import dataclass

import numpy as np

from .channels import ChannelSample, CoopChannelSample
from .errors import DatasetFormatError, InvalidArgumentError

DATASET_FORMAT = "wsrbeam-dataset"
DATASET_VERSION = 1


def encode_cvec(v) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex)]


def decode_cvec(pairs) -> np.ndarray:
    return np.array([complex(re, im) for re, im in pairs], dtype=complex)


@dataclass
class DatasetRecord:
    """One stored realization plus its optional solver solution."""

    sample: object                 # ChannelSample | CoopChannelSample
    solution_w: object = None      # ragged nested lists of reduced beamformer vectors
    solution_wsr: float = None
    d_km: float = None


def _encode_sample(rec: DatasetRecord, scenario: str) -> dict:
    s = rec.sample
    body = {
        "nt": list(s.nt),
        "chan": [[encode_cvec(v) for v in row] for row in s.chan],
        "alpha": [float(a) for a in s.alpha],
        "sigma2": [float(a) for a in s.sigma2],
        "power": [float(a) for a in s.power],
    }
    if rec.d_km is not None:
        body["d_km"] = float(rec.d_km)
    if rec.solution_w is not None:
        if scenario == "coop":
            sol = [[encode_cvec(v) for v in row] for row in rec.solution_w]
        else:
            sol = [encode_cvec(v) for v in rec.solution_w]
        body["solution"] = {"w": sol, "wsr": float(rec.solution_wsr)}
    return body


def _decode_sample(body: dict, scenario: str, index: int) -> DatasetRecord:
    try:
        nt = tuple(int(n) for n in body["nt"])
        chan = [[decode_cvec(v) for v in row] for row in body["chan"]]
        alpha = np.array(body["alpha"], dtype=float)
        sigma2 = np.array(body["sigma2"], dtype=float)
        power = np.array(body["power"], dtype=float)
        if scenario == "coop":
            sample = CoopChannelSample(chan=chan, alpha=alpha, sigma2=sigma2,
                                       power=power, nt=nt).validate()
        else:
            sample = ChannelSample(chan=chan, alpha=alpha, sigma2=sigma2,
                                   power=power, nt=nt).validate()
        sol_w = sol_wsr = None
        if "solution" in body:
            raw = body["solution"]
            if scenario == "coop":
                sol_w = [[decode_cvec(v) for v in row] for row in raw["w"]]
            else:
                sol_w = [decode_cvec(v) for v in raw["w"]]
            sol_wsr = float(raw["wsr"])
        return DatasetRecord(sample=sample, solution_w=sol_w, solution_wsr=sol_wsr,
                             d_km=body.get("d_km"))
    except DatasetFormatError:
        raise
    except (KeyError, TypeError, ValueError, InvalidArgumentError) as exc:
        raise DatasetFormatError(f"malformed record {index}: {exc}", record_index=index) from exc


def write_dataset(path, header: dict, records) -> None:
    """Write records under a self-describing header.

    The header must carry at least scenario and the shared mode flags; the
    record count and format tags are filled in here. All samples must agree
    with the header's scenario and weighted flag.
    """
    scenario = header.get("scenario", "ic")
    records = list(records)
    full_header = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "count": len(records),
        **header,
    }
    weighted = bool(header.get("weighted", False))
    for i, rec in enumerate(records):
        coop = isinstance(rec.sample, CoopChannelSample)
        if coop != (scenario == "coop"):
            raise InvalidArgumentError(f"record {i} scenario does not match header")
        if weighted:
            if abs(float(np.sum(rec.sample.alpha)) - 1.0) > 1e-9:
                raise InvalidArgumentError(f"record {i} weights do not sum to 1")
        elif not np.all(rec.sample.alpha == rec.sample.alpha[0]):
            raise InvalidArgumentError(f"record {i} is weighted but the header says sum-rate mode")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(full_header) + "\n")
        for rec in records:
            fh.write(json.dumps(_encode_sample(rec, scenario)) + "\n")


def read_dataset(path):
    """Load (header, records); malformed content names the record index."""
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise DatasetFormatError("empty dataset file")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"malformed header: {exc}") from exc
        if header.get("format") != DATASET_FORMAT:
            raise DatasetFormatError("not a dataset file (missing format tag)")
        scenario = header.get("scenario", "ic")
        records = []
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                body = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"malformed record {i}: {exc}", record_index=i) from exc
            records.append(_decode_sample(body, scenario, i))
    declared = header.get("count")
    if declared is not None and declared != len(records):
        raise DatasetFormatError(
            f"header declares {declared} records, file has {len(records)}",
            record_index=len(records))
    return header, records
