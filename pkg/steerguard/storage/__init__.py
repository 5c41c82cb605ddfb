from steerguard.container import get_container
from steerguard.storage.base import ArtifactStore
from steerguard.storage.local import LocalArtifactStore

# Container key for the store singleton
_STORE_SERVICE_KEY = 'artifact_store'


def get_artifact_store(app=None) -> ArtifactStore:
    """
    Return the artifact store (singleton per container).
    The store is created on first use from the app config (or defaults).
    """
    container = get_container()
    if not container.has(_STORE_SERVICE_KEY):
        settings = app.config if app is not None else {}
        container.register(
            _STORE_SERVICE_KEY,
            lambda: LocalArtifactStore(settings),
            singleton=True,
            service_type=ArtifactStore,
        )
    return container.get(_STORE_SERVICE_KEY)


__all__ = ['ArtifactStore', 'LocalArtifactStore', 'get_artifact_store']
