import logging
import os

from steerguard.core.errors import ArtifactError
from steerguard.storage import codec
from steerguard.storage.base import ArtifactStore

logger = logging.getLogger(__name__)


class LocalArtifactStore(ArtifactStore):
    """Store artifacts on the local filesystem (relative paths resolve under ARTIFACT_ROOT)."""

    def __init__(self, config):
        self.root = config.get('ARTIFACT_ROOT', '.')

    def resolve(self, path: str) -> str:
        return os.path.join(self.root, path)

    def save(self, path, kind, arrays, metadata=None):
        dest_path = self.resolve(path)
        blob = codec.encode(kind, arrays, metadata)
        directory = os.path.dirname(os.path.abspath(dest_path))
        os.makedirs(directory, exist_ok=True)
        # atomic replace
        tmp_path = f'{dest_path}.tmp'
        with open(tmp_path, 'wb') as handle:
            handle.write(blob)
        os.replace(tmp_path, dest_path)
        logger.info(f'LocalArtifactStore.save: {kind} -> {dest_path} ({len(blob)} bytes)')
        return dest_path

    def load(self, path, expected_kind=None):
        src_path = self.resolve(path)
        try:
            with open(src_path, 'rb') as handle:
                blob = handle.read()
        except FileNotFoundError:
            raise ArtifactError(f'artifact not found: {src_path}')
        logger.debug(f'LocalArtifactStore.load: {src_path}')
        return codec.decode(blob, expected_kind=expected_kind)
