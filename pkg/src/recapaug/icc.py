"""ICC matrix/TRC profile parsing, synthesis, and gamut mapping.

Profiles are ICC v2 containers restricted to the matrix/TRC RGB class:
a 3×3 colorant matrix (device RGB -> XYZ, Bradford-adapted to the D50
connection space) plus one tone curve per channel. Mapping between two
profiles is relative colorimetric with clipping.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    FormatError,
    ModeError,
    UnsupportedProfileError,
    ValidationError,
)
from .image import ColorMode, ImageBuffer

D50_WHITE = np.array([0.96422, 1.0, 0.82521])
D65_WHITE = np.array([0.95047, 1.0, 1.08883])

_BRADFORD = np.array(
    [
        [0.8951, 0.2664, -0.1614],
        [-0.7502, 1.7135, 0.0367],
        [0.0389, -0.0685, 1.0296],
    ]
)

_REQUIRED_TAGS = (b"wtpt", b"rXYZ", b"gXYZ", b"bXYZ", b"rTRC", b"gTRC", b"bTRC")


def bradford_adaptation(src_white: np.ndarray, dst_white: np.ndarray) -> np.ndarray:
    """3×3 chromatic adaptation matrix between two XYZ white points."""
    cone_src = _BRADFORD @ src_white
    cone_dst = _BRADFORD @ dst_white
    scale = np.diag(cone_dst / cone_src)
    return np.linalg.inv(_BRADFORD) @ scale @ _BRADFORD


def primaries_to_matrix(primaries, white: np.ndarray) -> np.ndarray:
    """Colorant matrix from xy primaries, scaled so RGB(1,1,1) hits `white`."""
    cols = []
    for x, y in primaries:
        cols.append([x / y, 1.0, (1.0 - x - y) / y])
    m = np.array(cols).T
    scale = np.linalg.solve(m, white)
    return m * scale


class ToneCurve:
    """Per-channel transfer curve: device value -> linear light.

    Either a pure gamma exponent or a sampled monotone table on [0, 1].
    """

    def __init__(self, gamma: float | None = None, table: np.ndarray | None = None):
        if (gamma is None) == (table is None):
            raise ValidationError("tone curve needs exactly one of gamma/table")
        if gamma is not None and gamma <= 0:
            raise ValidationError(f"gamma must be positive, got {gamma}")
        self.gamma = gamma
        if table is not None:
            t = np.asarray(table, dtype=np.float64)
            if t.ndim != 1 or t.size < 2:
                raise ValidationError("sampled curve needs >= 2 points")
            if (np.diff(t) < 0).any():
                raise ValidationError("tone curve must be monotone non-decreasing")
            if t[-1] <= t[0]:
                raise ValidationError("tone curve must rise from f(0) to f(1)")
            t = (t - t[0]) / (t[-1] - t[0])
            self.table = t
            self.grid = np.linspace(0.0, 1.0, t.size)
        else:
            self.table = None
            self.grid = None

    def decode(self, v: np.ndarray) -> np.ndarray:
        """Device -> linear."""
        v = np.clip(v, 0.0, 1.0)
        if self.gamma is not None:
            return v**self.gamma
        return np.interp(v, self.grid, self.table)

    def encode(self, v: np.ndarray) -> np.ndarray:
        """Linear -> device (inverse of decode)."""
        v = np.clip(v, 0.0, 1.0)
        if self.gamma is not None:
            return v ** (1.0 / self.gamma)
        return np.interp(v, self.table, self.grid)


@dataclass
class IccProfile:
    name: str
    white_point: np.ndarray  # native media white, XYZ
    colorants: np.ndarray  # 3×3, device RGB -> XYZ(D50)
    trc: tuple[ToneCurve, ToneCurve, ToneCurve]

    def __post_init__(self):
        self.white_point = np.asarray(self.white_point, dtype=np.float64)
        self.colorants = np.asarray(self.colorants, dtype=np.float64)
        if self.colorants.shape != (3, 3):
            raise ValidationError("colorants must be a 3×3 matrix")
        det = np.linalg.det(self.colorants)
        if not np.isfinite(det) or abs(det) < 1e-12:
            raise ValidationError(f"colorant matrix is singular (det={det:g})")
        self.inverse_colorants = np.linalg.inv(self.colorants)


# --- binary container ------------------------------------------------------

_D50_S15 = (0x0000F6D6, 0x00010000, 0x0000D32D)  # header PCS illuminant


def _s15f16_encode(v: float) -> int:
    raw = int(round(v * 65536.0))
    if not -(2**31) <= raw < 2**31:
        raise ValidationError(f"value {v} out of s15Fixed16 range")
    return raw & 0xFFFFFFFF


def _s15f16_decode(raw: int) -> float:
    if raw >= 0x80000000:
        raw -= 0x100000000
    return raw / 65536.0


def _xyz_tag(vec) -> bytes:
    body = struct.pack(">4sI", b"XYZ ", 0)
    for v in vec:
        body += struct.pack(">I", _s15f16_encode(float(v)))
    return body


def _curv_tag(curve: ToneCurve) -> bytes:
    if curve.gamma is not None:
        if abs(curve.gamma - 1.0) < 1e-12:
            return struct.pack(">4sII", b"curv", 0, 0)
        raw = int(round(curve.gamma * 256.0))
        if not 0 < raw <= 0xFFFF:
            raise ValidationError(f"gamma {curve.gamma} not encodable as u8Fixed8")
        return struct.pack(">4sIIH", b"curv", 0, 1, raw)
    pts = np.clip(np.round(curve.table * 65535.0), 0, 65535).astype(">u2")
    return struct.pack(">4sII", b"curv", 0, pts.size) + pts.tobytes()


def _desc_tag(name: str) -> bytes:
    ascii_bytes = name.encode("ascii") + b"\x00"
    body = struct.pack(">4sII", b"desc", 0, len(ascii_bytes)) + ascii_bytes
    body += struct.pack(">II", 0, 0)  # unicode language code + count
    body += struct.pack(">HB", 0, 0) + b"\x00" * 67  # scriptcode block
    return body


def write_icc(profile: IccProfile) -> bytes:
    """Serialize to a minimal ICC v2 RGB matrix/TRC container."""
    tags: list[tuple[bytes, bytes]] = [(b"desc", _desc_tag(profile.name))]
    tags.append((b"wtpt", _xyz_tag(profile.white_point)))
    for sig, col in zip((b"rXYZ", b"gXYZ", b"bXYZ"), profile.colorants.T):
        tags.append((sig, _xyz_tag(col)))
    for sig, curve in zip((b"rTRC", b"gTRC", b"bTRC"), profile.trc):
        tags.append((sig, _curv_tag(curve)))

    header_size = 128
    table_size = 4 + 12 * len(tags)
    offset = header_size + table_size
    entries = b""
    payload = b""
    for sig, body in tags:
        padded = body + b"\x00" * (-len(body) % 4)
        entries += struct.pack(">4sII", sig, offset, len(body))
        payload += padded
        offset += len(padded)

    total = header_size + table_size + len(payload)
    header = struct.pack(">I", total)
    header += b"none"  # CMM
    header += struct.pack(">I", 0x02400000)  # version 2.4
    header += b"mntr" + b"RGB " + b"XYZ "
    header += struct.pack(">6H", 2024, 1, 1, 0, 0, 0)
    header += b"acsp"
    header += b"\x00" * 4  # platform
    header += struct.pack(">I", 0)  # flags
    header += b"\x00" * 4 + b"\x00" * 4  # manufacturer, model
    header += struct.pack(">Q", 0)  # attributes
    header += struct.pack(">I", 1)  # relative colorimetric
    header += struct.pack(">III", *_D50_S15)
    header += b"\x00" * 4  # creator
    header += b"\x00" * (header_size - len(header))
    return header + struct.pack(">I", len(tags)) + entries + payload


def parse_icc(data: bytes) -> IccProfile:
    """Parse an ICC v2/v4 RGB matrix/TRC profile."""
    if len(data) < 132:
        raise FormatError(f"ICC stream too short ({len(data)} bytes)")
    declared = struct.unpack(">I", data[0:4])[0]
    if data[36:40] != b"acsp":
        raise FormatError("bad ICC magic (expected 'acsp' at offset 36)")
    if declared > len(data):
        raise FormatError(f"declared size {declared} exceeds stream ({len(data)})")

    (count,) = struct.unpack(">I", data[128:132])
    if 132 + 12 * count > len(data):
        raise FormatError("tag table truncated")
    table = {}
    for i in range(count):
        sig, offset, size = struct.unpack(">4sII", data[132 + 12 * i : 144 + 12 * i])
        if offset + size > len(data):
            raise FormatError(f"tag {sig!r} exceeds stream bounds")
        table[sig] = data[offset : offset + size]

    missing = [sig.decode() for sig in _REQUIRED_TAGS if sig not in table]
    if missing:
        raise UnsupportedProfileError(f"not a matrix/TRC RGB profile; missing {missing}")

    def read_xyz(sig: bytes) -> np.ndarray:
        body = table[sig]
        if body[:4] != b"XYZ " or len(body) < 20:
            raise FormatError(f"tag {sig!r} is not an XYZ tag")
        return np.array(
            [_s15f16_decode(v) for v in struct.unpack(">III", body[8:20])]
        )

    def read_curv(sig: bytes) -> ToneCurve:
        body = table[sig]
        if body[:4] != b"curv" or len(body) < 12:
            raise FormatError(f"tag {sig!r} is not a curv tag")
        (n,) = struct.unpack(">I", body[8:12])
        if n == 0:
            return ToneCurve(gamma=1.0)
        if n == 1:
            (raw,) = struct.unpack(">H", body[12:14])
            return ToneCurve(gamma=raw / 256.0)
        if len(body) < 12 + 2 * n:
            raise FormatError(f"curv tag {sig!r} truncated")
        pts = np.frombuffer(body, dtype=">u2", count=n, offset=12).astype(np.float64)
        return ToneCurve(table=pts / 65535.0)

    name = "unnamed"
    if b"desc" in table:
        body = table[b"desc"]
        if body[:4] == b"desc" and len(body) >= 12:
            (n,) = struct.unpack(">I", body[8:12])
            raw = body[12 : 12 + n].split(b"\x00", 1)[0]
            if raw:
                name = raw.decode("ascii", errors="replace")
        elif body[:4] == b"mluc" and len(body) >= 28:
            _, _, first_len, first_off = struct.unpack(">IIII", body[12:28])
            raw = body[first_off : first_off + first_len]
            name = raw.decode("utf-16-be", errors="replace").strip("\x00") or name

    colorants = np.column_stack([read_xyz(s) for s in (b"rXYZ", b"gXYZ", b"bXYZ")])
    return IccProfile(
        name=name,
        white_point=read_xyz(b"wtpt"),
        colorants=colorants,
        trc=(read_curv(b"rTRC"), read_curv(b"gTRC"), read_curv(b"bTRC")),
    )


# --- profile synthesis -----------------------------------------------------

def srgb_curve_table(points: int = 1024) -> np.ndarray:
    """Sampled sRGB transfer function (device -> linear)."""
    x = np.linspace(0.0, 1.0, points)
    return np.where(x <= 0.04045, x / 12.92, ((x + 0.055) / 1.055) ** 2.4)


def make_profile(name, primaries, white, gamma=None, table=None) -> IccProfile:
    """Build a matrix/TRC profile from primaries + white + one shared curve."""
    native = primaries_to_matrix(primaries, np.asarray(white, dtype=np.float64))
    adapted = bradford_adaptation(np.asarray(white, dtype=np.float64), D50_WHITE) @ native
    curve = ToneCurve(gamma=gamma) if table is None else ToneCurve(table=table)
    return IccProfile(
        name=name,
        white_point=np.asarray(white, dtype=np.float64),
        colorants=adapted,
        trc=(curve, curve, curve),
    )


# Published primaries and transfer characteristics of eleven common RGB
# working spaces. Gammas are stored as exact u8Fixed8 rationals so the
# binary round trip is lossless.
GAMMA_18 = 461 / 256
GAMMA_22 = 563 / 256
GAMMA_24 = 614 / 256

RGB_SPACE_DEFS = {
    "sRGB": dict(
        primaries=[(0.64, 0.33), (0.30, 0.60), (0.15, 0.06)],
        white=D65_WHITE, curve="srgb",
    ),
    "AdobeRGB1998": dict(
        primaries=[(0.64, 0.33), (0.21, 0.71), (0.15, 0.06)],
        white=D65_WHITE, gamma=GAMMA_22,
    ),
    "AppleRGB": dict(
        primaries=[(0.625, 0.34), (0.28, 0.595), (0.155, 0.07)],
        white=D65_WHITE, gamma=GAMMA_18,
    ),
    "BestRGB": dict(
        primaries=[(0.7347, 0.2653), (0.2150, 0.7750), (0.1300, 0.0350)],
        white=D50_WHITE, gamma=GAMMA_22,
    ),
    "BruceRGB": dict(
        primaries=[(0.64, 0.33), (0.28, 0.65), (0.15, 0.06)],
        white=D65_WHITE, gamma=GAMMA_22,
    ),
    "ColorMatchRGB": dict(
        primaries=[(0.630, 0.340), (0.295, 0.605), (0.150, 0.075)],
        white=D50_WHITE, gamma=GAMMA_18,
    ),
    "DisplayP3": dict(
        primaries=[(0.680, 0.320), (0.265, 0.690), (0.150, 0.060)],
        white=D65_WHITE, curve="srgb",
    ),
    "ECIRGB": dict(
        primaries=[(0.67, 0.33), (0.21, 0.71), (0.14, 0.08)],
        white=D50_WHITE, gamma=GAMMA_18,
    ),
    "ProPhotoRGB": dict(
        primaries=[(0.7347, 0.2653), (0.1596, 0.8404), (0.0366, 0.0001)],
        white=D50_WHITE, gamma=GAMMA_18,
    ),
    "Rec2020": dict(
        primaries=[(0.708, 0.292), (0.170, 0.797), (0.131, 0.046)],
        white=D65_WHITE, gamma=GAMMA_24,
    ),
    "WideGamutRGB": dict(
        primaries=[(0.735, 0.265), (0.115, 0.826), (0.157, 0.018)],
        white=D50_WHITE, gamma=GAMMA_22,
    ),
}


def build_default_profiles() -> list[IccProfile]:
    profiles = []
    for name, spec in RGB_SPACE_DEFS.items():
        table = srgb_curve_table() if spec.get("curve") == "srgb" else None
        profiles.append(
            make_profile(
                name,
                spec["primaries"],
                spec["white"],
                gamma=spec.get("gamma"),
                table=table,
            )
        )
    return profiles


def write_profile_bank(out_dir: Path, profiles=None) -> list[Path]:
    """Write `<name>.icc` files plus the bank.json index."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    profiles = build_default_profiles() if profiles is None else profiles
    index = {"version": 1, "profiles": []}
    paths = []
    for prof in profiles:
        path = out_dir / f"{prof.name}.icc"
        path.write_bytes(write_icc(prof))
        index["profiles"].append({"name": prof.name, "file": path.name})
        paths.append(path)
    (out_dir / "bank.json").write_text(json.dumps(index, indent=2))
    return paths


def load_profile_bank(bank_dir: Path) -> list[IccProfile]:
    """Load profiles listed in `bank.json` from a profile directory."""
    bank_dir = Path(bank_dir)
    index_path = bank_dir / "bank.json"
    if not index_path.exists():
        raise ConfigError(f"profile bank index missing: {index_path}")
    index = json.loads(index_path.read_text())
    profiles = []
    for entry in index["profiles"]:
        profiles.append(parse_icc((bank_dir / entry["file"]).read_bytes()))
    if not profiles:
        raise ConfigError(f"profile bank at {bank_dir} is empty")
    return profiles


# --- color transforms ------------------------------------------------------

def gamut_map(img: ImageBuffer, src: IccProfile, dst: IccProfile) -> ImageBuffer:
    """Relative colorimetric map src -> XYZ(D50) -> dst, clipped to [0,1]."""
    if img.mode != ColorMode.RGB:
        raise ModeError(f"gamut_map needs RGB input, got {img.mode.value}")
    flat = img.data.reshape(-1, 3)
    linear = np.empty_like(flat)
    for ch in range(3):
        linear[:, ch] = src.trc[ch].decode(flat[:, ch])
    xyz = linear @ src.colorants.T
    dst_linear = xyz @ dst.inverse_colorants.T
    out = np.empty_like(flat)
    for ch in range(3):
        out[:, ch] = dst.trc[ch].encode(np.clip(dst_linear[:, ch], 0.0, 1.0))
    return ImageBuffer(np.clip(out, 0.0, 1.0).reshape(img.data.shape), ColorMode.RGB)


def color_diversity(img: ImageBuffer, rng, bank: list[IccProfile], trace=None) -> ImageBuffer:
    """Gamut-map through an (input, output) profile pair drawn from the bank."""
    if not bank:
        raise ConfigError("profile bank is empty")
    src = bank[int(rng.integers(len(bank)))]
    dst = bank[int(rng.integers(len(bank)))]
    if trace is not None:
        trace.append({"src_profile": src.name, "dst_profile": dst.name})
    return gamut_map(img, src, dst)
