"""
Artifact file codec.

Layout:
    STEERGUARD\n
    {"format_version": 1, "kind": ..., "manifest": [[name, shape], ...],
     "metadata": {...}, "payload_bytes": N, "sha256": "..."}\n
    raw little-endian float64 values, arrays concatenated in manifest order
"""
import hashlib
import json
from typing import Dict, List, Sequence, Tuple

import numpy as np

from steerguard.core.errors import ArtifactError, ValidationError, VersionError

MAGIC = b'STEERGUARD\n'
FORMAT_VERSION = 1
KINDS = ('model', 'perturbation', 'generator')
DTYPE = np.dtype('<f8')


def encode(kind: str, arrays: Sequence[Tuple[str, np.ndarray]], metadata: dict = None) -> bytes:
    if kind not in KINDS:
        raise ValidationError(f'artifact kind must be one of {KINDS}, got {kind!r}')
    names = [name for name, _ in arrays]
    if len(set(names)) != len(names):
        raise ValidationError('artifact array names must be unique')

    chunks = []
    manifest = []
    for name, array in arrays:
        arr = np.ascontiguousarray(np.asarray(array, dtype=np.float64))
        manifest.append([name, list(arr.shape)])
        chunks.append(arr.astype(DTYPE, copy=False).tobytes())
    payload = b''.join(chunks)

    header = {
        'format_version': FORMAT_VERSION,
        'kind': kind,
        'manifest': manifest,
        'metadata': metadata or {},
        'payload_bytes': len(payload),
        'sha256': hashlib.sha256(payload).hexdigest(),
    }
    header_line = json.dumps(header, sort_keys=True, separators=(',', ':')).encode('utf-8')
    return MAGIC + header_line + b'\n' + payload


def decode(blob: bytes, expected_kind: str = None) -> Tuple[dict, Dict[str, np.ndarray]]:
    """Parse an artifact; returns (header, {name: array}) in manifest order"""
    if not blob.startswith(MAGIC):
        raise ArtifactError('not a steerguard artifact (bad magic line)')
    end = blob.find(b'\n', len(MAGIC))
    if end < 0:
        raise ArtifactError('artifact header is truncated')
    try:
        header = json.loads(blob[len(MAGIC):end].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ArtifactError(f'artifact header is not valid JSON: {e}')
    if not isinstance(header, dict):
        raise ArtifactError('artifact header must be a JSON object')

    version = header.get('format_version')
    if not isinstance(version, int):
        raise ArtifactError('artifact header lacks an integer format_version')
    if version > FORMAT_VERSION:
        raise VersionError(f'artifact format_version {version} is newer than supported ({FORMAT_VERSION})')
    kind = header.get('kind')
    if kind not in KINDS:
        raise ArtifactError(f'unknown artifact kind {kind!r}')
    if expected_kind is not None and kind != expected_kind:
        raise ArtifactError(f'expected a {expected_kind} artifact, got {kind}')

    payload = blob[end + 1:]
    if len(payload) != header.get('payload_bytes'):
        raise ArtifactError(f'payload is {len(payload)} bytes, '
                            f'header declares {header.get("payload_bytes")} (truncated file?)')
    if hashlib.sha256(payload).hexdigest() != header.get('sha256'):
        raise ArtifactError('payload checksum mismatch')

    arrays: Dict[str, np.ndarray] = {}
    offset = 0
    manifest: List = header.get('manifest') or []
    for entry in manifest:
        try:
            name, shape = entry[0], tuple(int(s) for s in entry[1])
        except (TypeError, ValueError, IndexError):
            raise ArtifactError(f'malformed manifest entry {entry!r}')
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * DTYPE.itemsize
        if offset + nbytes > len(payload):
            raise ArtifactError(f'payload too short for array {name!r}')
        values = np.frombuffer(payload, dtype=DTYPE, count=count, offset=offset)
        arrays[name] = values.astype(np.float64).reshape(shape)
        offset += nbytes
    if offset != len(payload):
        raise ArtifactError('payload has trailing bytes not described by the manifest')
    return header, arrays
