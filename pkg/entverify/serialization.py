"""JSON documents for algebras, channels, dilations, states, bases, boxes, certificates and reports.

Complex numbers are [re, im] pairs, matrices are row-major nested lists.
Every document is checked against a Draft 7 schema before it is decoded;
schema violations surface as ``SchemaError`` with a JSON pointer.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Mapping, Optional

import numpy as np
from jsonschema import Draft7Validator

from .config import Config
from .errors import NotCompletelyPositiveError, SchemaError, ShapeMismatchError
from .services.algebra import MultimatrixAlgebra, ResourceState
from .services.channel import CONVENTIONS, Channel, Dilation, is_cp, make_dilation
from .services.diagram import BlockMap, OneMorphism
from .services.schemes import DimensionVerdict, ReversibilityCertificate
from .services.ueb import Classification, EntanglementCertificate, Refusal, UnitaryErrorBasis

logger = logging.getLogger(__name__)

VERSION = Config.SCHEMA_VERSION

# ----------------------------------------------------------------------
# Schemas
# ----------------------------------------------------------------------
_COMPLEX = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_MATRIX = {"type": "array", "items": {"type": "array", "items": {"$ref": "#/definitions/complex"}}}
_DIM = {"type": "integer", "minimum": 0}
_POSITIVE = {"type": "integer", "minimum": 1}
_ALGEBRA = {
    "type": "object",
    "properties": {
        "version": {"const": VERSION},
        "factors": {"type": "array", "items": _POSITIVE, "minItems": 1},
    },
    "required": ["factors"],
    "additionalProperties": False,
}
_BLOCK = {
    "type": "object",
    "properties": {"i": _DIM, "j": _DIM, "matrix": {"$ref": "#/definitions/matrix"}},
    "required": ["i", "j", "matrix"],
    "additionalProperties": False,
}
_WIRE = {
    "type": "object",
    "properties": {
        "left_index": _POSITIVE,
        "right_index": _POSITIVE,
        "dims": {"type": "array", "items": {"type": "array", "items": _DIM}},
    },
    "required": ["left_index", "right_index", "dims"],
    "additionalProperties": False,
}
_BLOCKMAP = {
    "type": "object",
    "properties": {
        "version": {"const": VERSION},
        "source": {"type": "array", "items": {"$ref": "#/definitions/wire"}},
        "target": {"type": "array", "items": {"$ref": "#/definitions/wire"}},
        "left": _POSITIVE,
        "right": _POSITIVE,
        "blocks": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "key": {
                        "type": "object",
                        "properties": {
                            "source": {"type": "array", "items": _DIM},
                            "target": {"type": "array", "items": _DIM},
                        },
                        "required": ["source", "target"],
                        "additionalProperties": False,
                    },
                    "matrix": {"$ref": "#/definitions/matrix"},
                },
                "required": ["key", "matrix"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["source", "target", "left", "right", "blocks"],
    "additionalProperties": False,
}
_UEB = {
    "type": "object",
    "properties": {
        "version": {"const": VERSION},
        "d": _POSITIVE,
        "elements": {"type": "array", "minItems": 1, "items": {"$ref": "#/definitions/matrix"}},
    },
    "required": ["d", "elements"],
    "additionalProperties": False,
}
_PAIR = {"type": "array", "items": _DIM, "minItems": 2, "maxItems": 2}
_RESIDUAL = {"type": "number", "minimum": 0}
_RESIDUAL_PAIR = {"type": "array", "items": _RESIDUAL, "minItems": 2, "maxItems": 2}
_RESIDUAL_MAP = {"type": "object", "additionalProperties": {"type": "number"}}
_REVERSIBILITY = {
    "type": "object",
    "properties": {
        "version": {"const": VERSION},
        "kind": {"enum": ["pure", "mixed"]},
        "verdict": {"type": "boolean"},
        "positive": {"type": "boolean"},
        "solve_residual": _RESIDUAL,
        "pair_residuals": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"pair": _PAIR, "residual": _RESIDUAL},
                "required": ["pair", "residual"],
                "additionalProperties": False,
            },
        },
        "isometry_residuals": _RESIDUAL_PAIR,
        "coisometry_residuals": _RESIDUAL_PAIR,
        "tolerance": _RESIDUAL,
        "kappa_min_singular": _RESIDUAL,
        "dims": {
            "type": "object",
            "properties": {
                "dim_a": _DIM,
                "dim_b": _DIM,
                "equal": {"type": "boolean"},
                "satisfied": {"type": "boolean"},
                "source_margins": {"type": "array", "items": {"type": "integer"}},
                "target_margins": {"type": "array", "items": {"type": "integer"}},
            },
            "required": ["dim_a", "dim_b", "source_margins", "target_margins"],
            "additionalProperties": False,
        },
        "nu": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"pair": _PAIR, "box": {"$ref": "#/definitions/blockmap"}},
                "required": ["pair", "box"],
                "additionalProperties": False,
            },
        },
        "nu_blocks": {"type": "array", "items": {"$ref": "#/definitions/block"}},
        "kappa": {"$ref": "#/definitions/blockmap"},
    },
    "required": [
        "kind", "verdict", "positive", "solve_residual", "pair_residuals", "isometry_residuals",
        "coisometry_residuals", "tolerance", "dims", "nu", "nu_blocks",
    ],
    "additionalProperties": False,
}
_DEFINITIONS = {
    "complex": _COMPLEX,
    "matrix": _MATRIX,
    "algebra": _ALGEBRA,
    "block": _BLOCK,
    "wire": _WIRE,
    "blockmap": _BLOCKMAP,
    "ueb": _UEB,
    "reversibility": _REVERSIBILITY,
}

SCHEMAS: Dict[str, Dict[str, Any]] = {
    "algebra": _ALGEBRA,
    "channel": {
        "type": "object",
        "properties": {
            "version": {"const": VERSION},
            "source": {"$ref": "#/definitions/algebra"},
            "target": {"$ref": "#/definitions/algebra"},
            "aux_dim": _DIM,
            "trace_convention": {"enum": list(CONVENTIONS)},
            "choi_blocks": {"type": "array", "items": {"$ref": "#/definitions/block"}},
        },
        "required": ["source", "target", "aux_dim", "trace_convention", "choi_blocks"],
        "additionalProperties": False,
    },
    "dilation": {
        "type": "object",
        "properties": {
            "version": {"const": VERSION},
            "source": {"$ref": "#/definitions/algebra"},
            "target": {"$ref": "#/definitions/algebra"},
            "aux_dim": _DIM,
            "env_dims": {"type": "array", "items": {"type": "array", "items": _DIM}},
            "minimal": {"type": "boolean"},
            "trace_convention": {"enum": list(CONVENTIONS)},
            "tau": {"type": "array", "items": {"$ref": "#/definitions/block"}},
            "lambda": {"type": "array", "items": {"$ref": "#/definitions/block"}},
        },
        "required": ["source", "target", "aux_dim", "env_dims", "minimal", "trace_convention", "tau"],
        "additionalProperties": False,
    },
    "state": {
        "type": "object",
        "properties": {
            "version": {"const": VERSION},
            "h1": _POSITIVE,
            "h2": _POSITIVE,
            "omega": {"$ref": "#/definitions/matrix"},
            "components": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "properties": {
                        "weight": {"type": "number"},
                        "omega": {"$ref": "#/definitions/matrix"},
                    },
                    "required": ["weight", "omega"],
                    "additionalProperties": False,
                },
            },
        },
        "required": ["h1", "h2"],
        "oneOf": [{"required": ["omega"]}, {"required": ["components"]}],
        "additionalProperties": False,
    },
    "ueb": _UEB,
    "blockmap": _BLOCKMAP,
    "report": {
        "type": "object",
        "properties": {
            "version": {"const": VERSION},
            "command": {"type": "string"},
            "verdict": {"type": ["boolean", "null"]},
            "residuals": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
            "tolerances": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
            "certificates": {"type": "object"},
        },
        "required": ["version", "command", "verdict", "residuals", "tolerances"],
        "additionalProperties": False,
    },
    "reversibility": _REVERSIBILITY,
    "classification": {
        "type": "object",
        "properties": {
            "version": {"const": VERSION},
            "accepted": {"type": "boolean"},
            "residuals": _RESIDUAL_MAP,
            "ueb": {"$ref": "#/definitions/ueb"},
            "max_entanglement": {
                "type": "object",
                "properties": {"scale": {"type": "number"}, "residual": _RESIDUAL, "tolerance": _RESIDUAL},
                "required": ["scale", "residual", "tolerance"],
                "additionalProperties": False,
            },
            "refusal": {
                "type": "object",
                "properties": {
                    "stage": {"type": "string"},
                    "message": {"type": "string"},
                    "residuals": _RESIDUAL_MAP,
                },
                "required": ["stage", "message"],
                "additionalProperties": False,
            },
            "reversibility": {"$ref": "#/definitions/reversibility"},
        },
        "required": ["accepted", "residuals"],
        "oneOf": [
            {"properties": {"accepted": {"const": True}}, "required": ["ueb", "max_entanglement"]},
            {"properties": {"accepted": {"const": False}}, "required": ["refusal"]},
        ],
        "additionalProperties": False,
    },
}

_VALIDATORS = {
    kind: Draft7Validator({**schema, "definitions": _DEFINITIONS}) for kind, schema in SCHEMAS.items()
}


def _pointer(path: Iterable) -> str:
    parts = [str(p).replace("~", "~0").replace("/", "~1") for p in path]
    return "/" + "/".join(parts) if parts else ""


def validate(doc: Any, kind: str) -> None:
    """Raise SchemaError for the first violation (ordered by document path)."""
    if kind not in _VALIDATORS:
        raise SchemaError(f"unknown document kind {kind!r}")
    errors = sorted(_VALIDATORS[kind].iter_errors(doc), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        err = errors[0]
        raise SchemaError(err.message, _pointer(err.absolute_path))


# ----------------------------------------------------------------------
# Numbers and matrices
# ----------------------------------------------------------------------
def encode_matrix(a) -> list:
    a = np.asarray(a, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def decode_matrix(rows, shape=None, pointer: str = "") -> np.ndarray:
    if len(rows) == 0:
        return np.zeros(shape if shape is not None else (0, 0), dtype=complex)
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise SchemaError("matrix rows have different lengths", pointer)
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 3:
        # rows of zero width
        arr = arr.reshape(len(rows), 0, 2)
    out = arr[..., 0] + 1j * arr[..., 1]
    if shape is not None:
        if out.size == 0 and int(np.prod(shape)) == 0:
            return np.zeros(shape, dtype=complex)
        if out.shape != tuple(shape):
            raise SchemaError(f"matrix must be {shape[0]}x{shape[1]}, got {out.shape[0]}x{out.shape[1]}", pointer)
    return out


# ----------------------------------------------------------------------
# Algebras and channels
# ----------------------------------------------------------------------
def algebra_to_dict(a: MultimatrixAlgebra) -> dict:
    return {"factors": list(a.factors)}


def algebra_from_dict(doc: dict) -> MultimatrixAlgebra:
    validate(doc, "algebra")
    return MultimatrixAlgebra(tuple(doc["factors"]))


def channel_to_dict(c: Channel) -> dict:
    return {
        "version": VERSION,
        "source": algebra_to_dict(c.source),
        "target": algebra_to_dict(c.target),
        "aux_dim": c.aux_dim,
        "trace_convention": c.convention,
        "choi_blocks": [
            {"i": i, "j": j, "matrix": encode_matrix(c.choi(i, j))} for i, j in c.block_keys()
        ],
    }


def _blocks_by_key(entries, field: str, m: int, n: int) -> Dict:
    out = {}
    for idx, entry in enumerate(entries):
        key = (entry["i"], entry["j"])
        pointer = f"/{field}/{idx}"
        if key[0] >= m or key[1] >= n:
            raise SchemaError(f"block index {key} out of range", pointer)
        if key in out:
            raise SchemaError(f"duplicate block {key}", pointer)
        out[key] = (entry["matrix"], pointer)
    return out


def channel_from_dict(doc: dict, check_cp: bool = True) -> Channel:
    validate(doc, "channel")
    source = MultimatrixAlgebra(tuple(doc["source"]["factors"]))
    target = MultimatrixAlgebra(tuple(doc["target"]["factors"]))
    h = max(doc["aux_dim"], 1)
    given = _blocks_by_key(doc["choi_blocks"], "choi_blocks", source.size, target.size)
    rows = []
    for i, d in enumerate(source.factors):
        row = []
        for j, e in enumerate(target.factors):
            size = e * h * d
            if (i, j) not in given:
                raise SchemaError(f"missing Choi block (i={i}, j={j})", "/choi_blocks")
            matrix, pointer = given[(i, j)]
            row.append(decode_matrix(matrix, (size, size), pointer + "/matrix"))
        rows.append(tuple(row))
    c = Channel(source, target, doc["aux_dim"], tuple(rows), doc["trace_convention"])
    if check_cp:
        report = is_cp(c)
        if not report:
            i, j = report.worst_block
            raise NotCompletelyPositiveError(
                f"Choi block (i={i}, j={j}) has eigenvalue {report.worst_eigenvalue:.3e}",
                block=report.worst_block, eigenvalue=report.worst_eigenvalue,
            )
    return c


# ----------------------------------------------------------------------
# Dilations and boxes
# ----------------------------------------------------------------------
def dilation_to_dict(d: Dilation) -> dict:
    doc = {
        "version": VERSION,
        "source": algebra_to_dict(d.source),
        "target": algebra_to_dict(d.target),
        "aux_dim": d.aux_dim,
        "env_dims": [list(row) for row in d.env_dims],
        "minimal": d.minimal,
        "trace_convention": d.convention,
        "tau": [
            {"i": i, "j": j, "matrix": encode_matrix(d.tau_block(i, j))}
            for i in range(d.source.size)
            for j in range(d.target.size)
        ],
    }
    if d.lam is not None:
        doc["lambda"] = [
            {"i": i, "j": j, "matrix": encode_matrix(d.lam[((j, i), (j, i))])}
            for i in range(d.source.size)
            for j in range(d.target.size)
        ]
    return doc


def dilation_from_dict(doc: dict) -> Dilation:
    """Rebuild a dilation; lambda is recomputed from tau rather than trusted."""
    validate(doc, "dilation")
    source = MultimatrixAlgebra(tuple(doc["source"]["factors"]))
    target = MultimatrixAlgebra(tuple(doc["target"]["factors"]))
    env_dims = doc["env_dims"]
    if len(env_dims) != target.size or any(len(row) != source.size for row in env_dims):
        raise SchemaError(f"env_dims must be {target.size}x{source.size}", "/env_dims")
    h = max(doc["aux_dim"], 1)
    given = _blocks_by_key(doc["tau"], "tau", source.size, target.size)
    kraus = {}
    for i, d in enumerate(source.factors):
        for j, e in enumerate(target.factors):
            r = env_dims[j][i]
            matrix, pointer = given.get((i, j), ([], "/tau"))
            block = decode_matrix(matrix, (e * r, h * d), pointer + "/matrix")
            kraus[(i, j)] = list(block.reshape(e, r, h * d).transpose(1, 0, 2))
    return make_dilation(source, target, doc["aux_dim"], kraus, doc["minimal"], doc["trace_convention"])


def _wire_to_dict(w: OneMorphism) -> dict:
    return {"left_index": w.left_index, "right_index": w.right_index, "dims": [list(r) for r in w.dims]}


def blockmap_to_dict(f: BlockMap) -> dict:
    return {
        "source": [_wire_to_dict(w) for w in f.source],
        "target": [_wire_to_dict(w) for w in f.target],
        "left": f.left,
        "right": f.right,
        "blocks": [
            {"key": {"source": list(s), "target": list(t)}, "matrix": encode_matrix(b)}
            for (s, t), b in f.blocks.items()
        ],
    }


def blockmap_from_dict(doc: dict) -> BlockMap:
    validate(doc, "blockmap")
    try:
        source = tuple(OneMorphism(w["left_index"], w["right_index"], w["dims"]) for w in doc["source"])
        target = tuple(OneMorphism(w["left_index"], w["right_index"], w["dims"]) for w in doc["target"])
    except ShapeMismatchError as exc:
        raise SchemaError(str(exc), "/source") from exc
    given = {}
    for idx, entry in enumerate(doc["blocks"]):
        key = (tuple(entry["key"]["source"]), tuple(entry["key"]["target"]))
        given[key] = (entry["matrix"], f"/blocks/{idx}/matrix")

    def fill(s, t):
        if (s, t) not in given:
            return None
        matrix, pointer = given[(s, t)]
        return decode_matrix(matrix, None, pointer)

    return BlockMap.build(source, target, fill, left=doc["left"], right=doc["right"])


# ----------------------------------------------------------------------
# States and bases
# ----------------------------------------------------------------------
def state_to_dict(w: ResourceState) -> dict:
    doc = {"version": VERSION, "h1": w.h1, "h2": w.h2}
    if w.kind == "pure":
        doc["omega"] = encode_matrix(w.omega)
    else:
        doc["components"] = [{"weight": p, "omega": encode_matrix(om)} for p, om in w.components]
    return doc


def state_from_dict(doc: dict, renormalize: bool = False) -> ResourceState:
    validate(doc, "state")
    shape = (doc["h2"], doc["h1"])
    if "omega" in doc:
        return ResourceState.pure(decode_matrix(doc["omega"], shape, "/omega"), renormalize=renormalize)
    comps = [
        (entry["weight"], decode_matrix(entry["omega"], shape, f"/components/{idx}/omega"))
        for idx, entry in enumerate(doc["components"])
    ]
    return ResourceState.mixed(comps, renormalize=renormalize)


def ueb_to_dict(u: UnitaryErrorBasis) -> dict:
    return {"version": VERSION, "d": u.d, "elements": [encode_matrix(el) for el in u]}


def ueb_elements_from_dict(doc: dict) -> list:
    """Decode the matrices of a UEB document without checking the basis axioms."""
    validate(doc, "ueb")
    d = doc["d"]
    return [decode_matrix(el, (d, d), f"/elements/{k}") for k, el in enumerate(doc["elements"])]


def ueb_from_dict(doc: dict) -> UnitaryErrorBasis:
    elements = ueb_elements_from_dict(doc)
    return UnitaryErrorBasis(doc["d"], tuple(elements))


# ----------------------------------------------------------------------
# Reports
# ----------------------------------------------------------------------
def _clean(values: Optional[Mapping[str, Optional[float]]]) -> Dict[str, float]:
    out = {}
    for name, value in (values or {}).items():
        if value is None:
            continue
        value = float(value)
        if math.isnan(value):
            continue
        out[name] = abs(value) if value == 0 else value
    return out


@dataclass(frozen=True)
class Report:
    """A verification report as written by every command."""

    command: str
    verdict: Optional[bool]
    residuals: Dict[str, float] = field(default_factory=dict)
    tolerances: Dict[str, float] = field(default_factory=dict)
    certificates: Dict[str, Any] = field(default_factory=dict)

    @property
    def reversibility(self) -> Optional[ReversibilityCertificate]:
        doc = self.certificates.get("reversibility")
        return None if doc is None else reversibility_from_dict(doc)


def build_report(command: str, verdict: Optional[bool], residuals=None, tolerances=None,
                 certificates=None) -> dict:
    report = {
        "version": VERSION,
        "command": command,
        "verdict": None if verdict is None else bool(verdict),
        "residuals": _clean(residuals),
        "tolerances": _clean(tolerances),
    }
    if certificates:
        report["certificates"] = certificates
    validate(report, "report")
    return report


def report_to_dict(r: Report) -> dict:
    return build_report(r.command, r.verdict, r.residuals, r.tolerances, r.certificates)


def report_from_dict(doc: dict) -> Report:
    validate(doc, "report")
    return Report(
        doc["command"], doc["verdict"], dict(doc["residuals"]), dict(doc["tolerances"]),
        dict(doc.get("certificates", {})),
    )


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2)


# ----------------------------------------------------------------------
# Certificates
# ----------------------------------------------------------------------
def reversibility_to_dict(cert: ReversibilityCertificate) -> dict:
    doc = {
        "kind": cert.kind,
        "verdict": bool(cert.verdict),
        "positive": bool(cert.positive),
        "solve_residual": float(cert.solve_residual),
        "pair_residuals": [
            {"pair": [c2, c], "residual": float(res)} for (c2, c), res in sorted(cert.pair_residuals.items())
        ],
        "isometry_residuals": [float(r) for r in cert.isometry_residuals],
        "coisometry_residuals": [float(r) for r in cert.coisometry_residuals],
        "tolerance": float(cert.tolerance),
        "dims": {
            "dim_a": cert.dims.source_dim,
            "dim_b": cert.dims.target_dim,
            "equal": cert.dims.equal,
            "satisfied": cert.dims.satisfied,
            "source_margins": list(cert.dims.source_margins),
            "target_margins": list(cert.dims.target_margins),
        },
        "nu": [
            {"pair": [c2, c], "box": blockmap_to_dict(box)}
            for (c2, c), box in sorted(cert.nu.items())
        ],
        "nu_blocks": [
            {"i": i, "j": j, "matrix": encode_matrix(block)} for (j, i), block in sorted(cert.nu_blocks.items())
        ],
    }
    if cert.kappa is not None:
        doc["kappa"] = blockmap_to_dict(cert.kappa)
    if cert.kappa_min_singular is not None:
        doc["kappa_min_singular"] = float(cert.kappa_min_singular)
    return doc


def reversibility_from_dict(doc: dict) -> ReversibilityCertificate:
    """Rebuild a certificate; the reduced problem it was computed on is not stored."""
    validate(doc, "reversibility")
    dims = doc["dims"]
    nu = {}
    for idx, entry in enumerate(doc["nu"]):
        pair = tuple(entry["pair"])
        if pair in nu:
            raise SchemaError(f"duplicate nu box {pair}", f"/nu/{idx}")
        nu[pair] = blockmap_from_dict(entry["box"])
    nu_blocks = {}
    for idx, entry in enumerate(doc["nu_blocks"]):
        matrix = decode_matrix(entry["matrix"], None, f"/nu_blocks/{idx}/matrix")
        if matrix.shape[0] != matrix.shape[1]:
            raise SchemaError("nu blocks must be square", f"/nu_blocks/{idx}/matrix")
        nu_blocks[(entry["j"], entry["i"])] = matrix
    return ReversibilityCertificate(
        kind=doc["kind"],
        verdict=doc["verdict"],
        solve_residual=doc["solve_residual"],
        pair_residuals={tuple(e["pair"]): e["residual"] for e in doc["pair_residuals"]},
        nu=nu,
        kappa=blockmap_from_dict(doc["kappa"]) if "kappa" in doc else None,
        isometry_residuals=tuple(doc["isometry_residuals"]),
        coisometry_residuals=tuple(doc["coisometry_residuals"]),
        positive=doc["positive"],
        dims=DimensionVerdict(
            dims["dim_a"], dims["dim_b"], tuple(dims["source_margins"]), tuple(dims["target_margins"])
        ),
        tolerance=doc["tolerance"],
        nu_blocks=nu_blocks,
        kappa_min_singular=doc.get("kappa_min_singular"),
    )


def classification_to_dict(result: Classification) -> dict:
    doc = {"accepted": bool(result.accepted), "residuals": _clean(result.residuals)}
    if result.accepted:
        doc["ueb"] = ueb_to_dict(result.ueb)
        doc["max_entanglement"] = {
            "scale": result.certificate.scale,
            "residual": result.certificate.residual,
            "tolerance": result.certificate.tolerance,
        }
    else:
        doc["refusal"] = {
            "stage": result.refusal.stage,
            "message": result.refusal.message,
            "residuals": _clean(result.refusal.residuals),
        }
    if result.reversibility is not None:
        doc["reversibility"] = reversibility_to_dict(result.reversibility)
    return doc


def classification_from_dict(doc: dict) -> Classification:
    validate(doc, "classification")
    ueb, certificate, refusal = None, None, None
    if doc["accepted"]:
        ueb = ueb_from_dict(doc["ueb"])
        entry = doc["max_entanglement"]
        certificate = EntanglementCertificate(entry["scale"], entry["residual"], entry["tolerance"])
    else:
        entry = doc["refusal"]
        refusal = Refusal(entry["stage"], entry["message"], dict(entry.get("residuals", {})))
    reversibility = doc.get("reversibility")
    return Classification(
        doc["accepted"], ueb, certificate, refusal, dict(doc["residuals"]),
        None if reversibility is None else reversibility_from_dict(reversibility),
    )


# ----------------------------------------------------------------------
# Files
# ----------------------------------------------------------------------
_DECODERS = {
    "algebra": algebra_from_dict,
    "channel": channel_from_dict,
    "dilation": dilation_from_dict,
    "state": state_from_dict,
    "ueb": ueb_from_dict,
    "blockmap": blockmap_from_dict,
    "report": report_from_dict,
    "reversibility": reversibility_from_dict,
    "classification": classification_from_dict,
}


def read_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def load(path: str, kind: str, **kwargs):
    """Read and decode a document of the given kind from a file."""
    if kind not in _DECODERS:
        raise SchemaError(f"unknown document kind {kind!r}")
    doc = read_json(path)
    logger.debug("[Serialization] loading %s from %s", kind, path)
    return _DECODERS[kind](doc, **kwargs)


def save(path: str, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(doc))
        fh.write("\n")
