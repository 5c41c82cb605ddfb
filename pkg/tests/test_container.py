import pytest

from steerguard import create_app
from steerguard.attacks import OptRunner
from steerguard.container import Container, get_container, inject, provide
from steerguard.storage import ArtifactStore, LocalArtifactStore, get_artifact_store


class TestContainer:
    def test_singleton(self):
        container = Container()
        container.register('thing', object)
        assert container.get('thing') is container.get('thing')

    def test_factory_receives_kwargs(self):
        container = Container()
        container.register('pair', lambda a=0: (a, object()), singleton=False)
        first, second = container.get('pair', a=1), container.get('pair', a=1)
        assert first[0] == 1 and first[1] is not second[1]

    def test_type_lookup(self):
        container = Container()
        store = LocalArtifactStore({'ARTIFACT_ROOT': 'x'})
        container.register_instance('store', store, service_type=ArtifactStore)
        assert container.get(service_type=LocalArtifactStore) is store
        assert container.has(service_type=ArtifactStore)

    def test_missing(self):
        with pytest.raises(KeyError):
            Container().get('nothing')

    def test_reregistering_drops_the_old_instance(self):
        container = Container()
        container.register('n', lambda: 1)
        assert container.get('n') == 1
        container.register('n', lambda: 2)
        assert container.get('n') == 2


class TestWiring:
    def test_app_registers_services(self, app, tmp_path):
        assert get_container().get('app') is app
        store = get_artifact_store()
        assert store.root == str(tmp_path)

    def test_provide_runner(self, app):
        assert isinstance(provide('attack.opt'), OptRunner)

    def test_inject_by_name(self, app, tmp_path):
        @inject('artifact_store')
        def where(path, artifact_store=None):
            return artifact_store.resolve(path)

        assert where('m.bin') == str(tmp_path / 'm.bin')
        other = LocalArtifactStore({'ARTIFACT_ROOT': 'elsewhere'})
        assert where('m.bin', artifact_store=other) == 'elsewhere/m.bin'

    def test_inject_by_type(self, app):
        @inject()
        def store_of(artifact_store: ArtifactStore = None):
            return artifact_store

        assert store_of() is get_artifact_store()

    def test_new_app_gets_a_new_store(self, tmp_path):
        create_app('testing', overrides={'ARTIFACT_ROOT': str(tmp_path / 'a')})
        first = get_artifact_store()
        create_app('testing', overrides={'ARTIFACT_ROOT': str(tmp_path / 'b')})
        assert get_artifact_store() is not first
        assert get_artifact_store().root == str(tmp_path / 'b')
