"""
Service registry for steerguard.

create_app() puts the app, the artifact store and one factory per attack
(`attack.<id>`) in here; commands and helpers pull them back out by name or
by type.
"""
import inspect
import threading
from dataclasses import dataclass
from functools import wraps
from typing import Any, Callable, Dict, List, Optional, Type, get_type_hints

_MISSING = object()


@dataclass
class _Registration:
    factory: Optional[Callable[..., Any]]
    shared: bool
    instance: Any = _MISSING


class Container:
    """Named services with optional lookup by (base) type"""

    def __init__(self):
        self._services: Dict[str, _Registration] = {}
        self._by_type: Dict[Type, str] = {}
        self._lock = threading.Lock()

    def register(self, name: str, factory: Callable[..., Any], singleton: bool = True,
                 service_type: Optional[Type] = None):
        """
        Register `factory` under `name`, replacing any earlier registration.

        Singletons are built on first get(); other services are built on every
        get() and receive its keyword arguments (e.g. an attack config).
        """
        self._services[name] = _Registration(factory, singleton)
        if service_type is not None:
            self._by_type[service_type] = name

    def register_instance(self, name: str, instance: Any, service_type: Optional[Type] = None):
        self._services[name] = _Registration(None, True, instance)
        if service_type is not None:
            self._by_type[service_type] = name

    def _name_for(self, service_type: Type) -> Optional[str]:
        if service_type in self._by_type:
            return self._by_type[service_type]
        for registered, name in self._by_type.items():
            if isinstance(service_type, type) and issubclass(service_type, registered):
                return name
        return None

    def get(self, name: Optional[str] = None, service_type: Optional[Type] = None, **kwargs) -> Any:
        """Resolve a service; KeyError when nothing matches"""
        if name is None and service_type is not None:
            name = self._name_for(service_type)
            if name is None:
                raise KeyError(f'No service registered for type {service_type}')
        if name is None:
            raise KeyError('Either name or service_type must be provided')
        registration = self._services.get(name)
        if registration is None:
            raise KeyError(f'Service "{name}" is not registered')

        if not registration.shared:
            return registration.factory(**kwargs)
        if registration.instance is _MISSING:
            with self._lock:
                if registration.instance is _MISSING:
                    registration.instance = registration.factory()
        return registration.instance

    def has(self, name: Optional[str] = None, service_type: Optional[Type] = None) -> bool:
        if name is None and service_type is not None:
            name = self._name_for(service_type)
        return name is not None and name in self._services

    def names(self, prefix: str = '') -> List[str]:
        """Registered service names starting with prefix, sorted"""
        return sorted(n for n in self._services if n.startswith(prefix))


_container = Container()


def get_container() -> Container:
    return _container


def inject(*dependencies):
    """
    Fill missing (or None) keyword arguments from the container.

        @inject('artifact_store')
        def save(path, artifact_store=None): ...

    With no names, parameters are matched by their type annotation:

        @inject()
        def save(path, artifact_store: ArtifactStore = None): ...
    """
    def decorator(func: Callable) -> Callable:
        signature = inspect.signature(func)
        plain = [p.name for p in signature.parameters.values()
                 if p.kind not in (p.VAR_POSITIONAL, p.VAR_KEYWORD) and p.name not in ('self', 'cls')]

        @wraps(func)
        def wrapper(*args, **kwargs):
            container = get_container()
            given = signature.bind_partial(*args, **kwargs).arguments
            if dependencies:
                for dependency in dependencies:
                    if given.get(dependency) is None:
                        kwargs[dependency] = container.get(dependency)
                return func(*args, **kwargs)

            hints = get_type_hints(func)
            for param in plain:
                hint = hints.get(param)
                if given.get(param) is None and hint is not None and container.has(service_type=hint):
                    kwargs[param] = container.get(service_type=hint)
            return func(*args, **kwargs)

        return wrapper
    return decorator


def provide(name: Optional[str] = None, service_type: Optional[Type] = None, **kwargs) -> Any:
    """
    One-off lookup:

        store = provide('artifact_store')
        runner = provide('attack.opt', config=attack_config)
    """
    return get_container().get(name=name, service_type=service_type, **kwargs)
