from __future__ import annotations

import contextlib
import types
import warnings
import weakref
from collections.abc import Iterable, Iterator, Mapping
from contextlib import AbstractContextManager
from functools import cached_property
from inspect import CO_VARARGS
from logging import getLogger
from types import CodeType
from typing import (
    TYPE_CHECKING,
    Any,
    Callable,
    NamedTuple,
    TypeVar,
    Union,
    get_type_hints,
    overload,
)

logger = getLogger("conormal_mhd")


if TYPE_CHECKING:
    from typing import ClassVar, Literal

    from ._dynamics import RhsFunction


T = TypeVar("T")
Processor = Callable[[Any], Any]  # a processor must take one positional arg
Solver = Callable[..., Any]

# typevars that retain the signatures of the values passed in
ProcessorVar = TypeVar("ProcessorVar", bound=Processor)
SolverVar = TypeVar("SolverVar", bound=Solver)

Disposer = Callable[[], None]
Weight = float

# (processor,)
# (processor, record_type)
# (processor, record_type, weight)
ProcessorTuple = Union[
    tuple[Processor], tuple[Processor, type], tuple[Processor, type, Weight]
]
# All of the valid argument that can be passed to register()
ProcessorIterable = Union[Iterable[ProcessorTuple], Mapping[type, Processor]]
SolverMapping = Mapping[str, Solver]

_GLOBAL = "global"


class _RegisteredProcessor(NamedTuple):
    origin: type
    callback: Callable
    weight: float


class RegistrationContext(AbstractContextManager):
    """Context manager for registering solvers and processors.

    Primarily used as `with store.register(...)`.
    """

    def __init__(
        self,
        store: Store,
        *,
        solvers: SolverMapping | None = None,
        processors: ProcessorIterable | None = None,
    ) -> None:
        self._disposers: list[Disposer] = []
        if solvers is not None:
            self._disposers.append(store._register_solvers(solvers))
        if processors is not None:
            self._disposers.append(store._register_processors(processors))

    def __exit__(self, *_: Any) -> None:
        self.cleanup()

    def cleanup(self) -> None:
        """Unregister everything registered in this context."""
        for dispose in self._disposers:
            dispose()
        self._disposers.clear()


class Store:
    """A named registry of right-hand-side solvers and record processors.

    Solvers are looked up by name when a run asks for a model. Processors
    receive every record a run emits (norm rows, diagnostics, gaps), chosen by
    the record's type and invoked in descending weight order.
    """

    _instances: ClassVar[dict[str, Store]] = {}

    @classmethod
    def create(cls, name: str) -> Store:
        """Create a new Store instance with the given `name`.

        Parameters
        ----------
        name : str
            A name for the Store.

        Returns
        -------
        Store
            A Store instance with the given `name`.

        Raises
        ------
        KeyError
            If the name is already in use, or the name is 'global'.
        """
        name = name.lower()
        if name == _GLOBAL:
            raise KeyError("'global' is a reserved store name")
        elif name in cls._instances:
            raise KeyError(f"Store {name!r} already exists")
        cls._instances[name] = cls(name)
        return cls._instances[name]

    @classmethod
    def get_store(cls, name: str | None = None) -> Store:
        """Get the Store with the given `name`, or the global store.

        Raises
        ------
        KeyError
            If the name is not in use.
        """
        name = (name or _GLOBAL).lower()
        if name not in cls._instances:
            raise KeyError(f"Store {name!r} does not exist")
        return cls._instances[name]

    @classmethod
    def destroy(cls, name: str) -> None:
        """Destroy Store instance with the given `name`.

        Raises
        ------
        ValueError
            If the name matches the global store name.
        KeyError
            If the name is not in use.
        """
        name = name.lower()
        if name == _GLOBAL:
            raise ValueError("The global store cannot be destroyed")
        elif name not in cls._instances:
            raise KeyError(f"Store {name!r} does not exist")
        del cls._instances[name]

    def __init__(self, name: str) -> None:
        self._name = name
        self._solvers: dict[str, list[Solver]] = {}
        self._processors: list[_RegisteredProcessor] = []

    def __repr__(self) -> str:
        return f"Store({self._name!r})"

    @property
    def name(self) -> str:
        """Return the name of this Store."""
        return self._name

    def clear(self) -> None:
        """Clear all solvers and processors."""
        self._solvers.clear()
        self._processors.clear()
        with contextlib.suppress(AttributeError):
            del self._cached_processor_map

    # ------------------------- registration ------------------------------

    def register(
        self,
        *,
        solvers: SolverMapping | None = None,
        processors: ProcessorIterable | None = None,
    ) -> RegistrationContext:
        """Register solvers and/or processors at once.

        Solvers are given as a ``{name: rhs}`` mapping. Processors are either a
        ``{record_type: processor}`` mapping or an iterable of 1, 2 or 3-tuples:
            -  (processor,)
            -  (processor, record_type)
            -  (processor, record_type, weight)

        Returns
        -------
        RegistrationContext
            Leaving the context (or calling `.cleanup()`) unregisters
            everything registered here.

        Examples
        --------
        >>> with store.register(
                solvers={"damped": damped_rhs},
                processors=[(write_norm_row, NormRecord, 10)],
            ):
                ...
        """
        return RegistrationContext(self, solvers=solvers, processors=processors)

    def register_solver(self, name: str, solver: RhsFunction) -> RegistrationContext:
        """Register `solver` under `name`; it shadows a built-in model of that name."""
        return self.register(solvers={name: solver})

    def register_processor(
        self,
        processor: Processor,
        record_type: type | None = None,
        weight: float = 0,
    ) -> RegistrationContext:
        """Register `processor` for records of `record_type`.

        Parameters
        ----------
        processor : Callable
            A callback accepting one record.
        record_type : type | None
            The record type to handle. If not provided, it is read from the
            annotation of the first parameter of `processor`.
        weight : float, optional
            Higher weights are invoked first, by default 0.
        """
        return self.register(processors=[(processor, record_type, weight)])

    @overload
    def mark_solver(self, func: SolverVar, *, name: str | None = None) -> SolverVar: ...

    @overload
    def mark_solver(
        self, func: Literal[None] = ..., *, name: str | None = None
    ) -> Callable[[SolverVar], SolverVar]: ...

    def mark_solver(
        self, func: SolverVar | None = None, *, name: str | None = None
    ) -> Callable[[SolverVar], SolverVar] | SolverVar:
        """Decorate `func` as a solver registered under `name` (or its own name).

        Examples
        --------
        >>> @store.mark_solver(name="damped")
        >>> def damped_rhs(s, forcing=None, wall="no-slip"):
        ...     ...
        """

        def _deco(func: SolverVar) -> SolverVar:
            self.register(solvers={name or func.__name__: func})
            return func

        return _deco(func) if func is not None else _deco

    @overload
    def mark_processor(
        self, func: ProcessorVar, *, record_type: type | None = None, weight: float = 0
    ) -> ProcessorVar: ...

    @overload
    def mark_processor(
        self,
        func: Literal[None] = ...,
        *,
        record_type: type | None = None,
        weight: float = 0,
    ) -> Callable[[ProcessorVar], ProcessorVar]: ...

    def mark_processor(
        self,
        func: ProcessorVar | None = None,
        *,
        record_type: type | None = None,
        weight: float = 0,
    ) -> Callable[[ProcessorVar], ProcessorVar] | ProcessorVar:
        """Decorate `func` as a processor of its first parameter type."""

        def _deco(func: ProcessorVar) -> ProcessorVar:
            try:
                self.register_processor(func, record_type=record_type, weight=weight)
            except ValueError as e:
                warnings.warn(str(e), stacklevel=2)
            return func

        return _deco(func) if func is not None else _deco

    # ------------------------- retrieval ------------------------------

    @property
    def solver_names(self) -> list[str]:
        return sorted(n for n, stack in self._solvers.items() if stack)

    def has_solver(self, name: str) -> bool:
        return bool(self._solvers.get(name))

    def get_solver(self, name: str) -> RhsFunction:
        """Return the most recently registered solver called `name`.

        Raises
        ------
        KeyError
            If no solver of that name is registered.
        """
        stack = self._solvers.get(name)
        if not stack:
            raise KeyError(
                f"no solver {name!r} in store {self._name!r}; "
                f"registered: {self.solver_names}"
            )
        return stack[-1]  # type: ignore[return-value]

    def iter_processors(self, record_type: type) -> Iterator[Callable[[Any], Any]]:
        """Iterate over the processors of `record_type` and its base classes."""
        seen: set[int] = set()
        for base in record_type.__mro__:
            for cb in self._cached_processor_map.get(base, []):
                if id(cb) not in seen:
                    seen.add(id(cb))
                    yield cb

    def process(
        self,
        record: Any,
        *,
        first_processor_only: bool = False,
        raise_exception: bool = False,
    ) -> None:
        """Hand `record` to the processors registered for its type.

        Parameters
        ----------
        record : Any
            The record to process.
        first_processor_only : bool, optional
            If `True`, only the highest-weight processor is invoked.
        raise_exception : bool, optional
            If `True`, a failing processor's exception propagates and the
            remaining processors are skipped; otherwise it becomes a warning.
        """
        logger.debug("Invoking processors on %s record", type(record).__name__)
        for processor in self.iter_processors(type(record)):
            try:
                logger.debug("  P: %s", processor)
                processor(record)
            except Exception as e:
                if raise_exception:
                    raise e
                warnings.warn(
                    f"Processor {processor!r} failed to process record {record!r}: {e}",
                    stacklevel=2,
                )
            if first_processor_only:
                break

    # ------------------------- internals ------------------------------

    @cached_property
    def _cached_processor_map(self) -> dict[type, list[Processor]]:
        out: dict[type, list[_RegisteredProcessor]] = {}
        for p in self._processors:
            out.setdefault(p.origin, []).append(p)
        return {
            k: [p.callback for p in sorted(v, key=lambda p: p.weight, reverse=True)]
            for k, v in out.items()
        }

    def _register_solvers(self, solvers: SolverMapping) -> Disposer:
        added: list[tuple[str, Solver]] = []
        for name, solver in solvers.items():
            if not callable(solver):
                raise ValueError(f"Solvers must be callable. Got {solver!r}")
            logger.debug("Registering solver %r: %s", name, solver)
            self._solvers.setdefault(name, []).append(solver)
            added.append((name, solver))

        def _dispose() -> None:
            for name, solver in added:
                with contextlib.suppress(ValueError):
                    self._solvers[name].remove(solver)
                    logger.debug("Unregistering solver %r: %s", name, solver)

        return _dispose

    def _register_processors(self, processors: ProcessorIterable) -> Disposer:
        if isinstance(processors, Mapping):
            _callbacks: Iterable[tuple] = ((v, k) for k, v in processors.items())
        else:
            _callbacks = processors

        to_register: list[_RegisteredProcessor] = []
        for tup in _callbacks:
            callback, *rest = tup
            record_type: type | None = rest[0] if rest else None
            weight: float = rest[1] if len(rest) > 1 else 0
            if len(rest) > 2:
                raise ValueError(f"Invalid processor tuple: {tup!r}")

            callback = _validate_processor(callback)
            if record_type is None:
                record_type = _first_param_type(callback)
                if record_type is None:
                    raise ValueError(
                        f"Unable to determine the record type of {callback!r}: "
                        "annotate its first parameter or pass a record type"
                    )
            if isinstance(callback, types.MethodType):
                # a bound method must not keep its owner alive
                callback = self._methodwrap(callback)

            logger.debug(
                "Registering processor of %s: %s (weight: %s)",
                record_type.__name__,
                callback,
                weight,
            )
            to_register.append(_RegisteredProcessor(record_type, callback, weight))

        def _dispose() -> None:
            for p in to_register:
                with contextlib.suppress(ValueError):
                    self._processors.remove(p)
                    logger.debug(
                        "Unregistering processor of %s: %s",
                        p.origin.__name__,
                        p.callback,
                    )
            # attribute error in case the cache was never built
            with contextlib.suppress(AttributeError):
                delattr(self, "_cached_processor_map")

        if to_register:
            self._processors.extend(to_register)
            with contextlib.suppress(AttributeError):
                delattr(self, "_cached_processor_map")

        return _dispose

    def _methodwrap(self, callback: types.MethodType) -> Callable:
        """Wrap a method in a weakref to prevent a strong reference to the owner."""
        ref = weakref.WeakMethod(callback)

        def _callback(*args: Any, **kwargs: Any) -> Any:
            cb = ref()
            if cb is not None:
                return cb(*args, **kwargs)

            # The owner was garbage collected.  Remove it from the registry.
            for item in reversed(self._processors):
                if item.callback is _callback:
                    self._processors.remove(item)
            with contextlib.suppress(AttributeError):
                delattr(self, "_cached_processor_map")

        return _callback


def _first_param_type(obj: Callable) -> type | None:
    code: CodeType | None = getattr(obj, "__code__", None)
    if code is None or code.co_argcount < 1:
        return None
    first = code.co_varnames[0]
    if first == "self" and code.co_argcount > 1:
        first = code.co_varnames[1]
    try:
        hint = get_type_hints(obj).get(first)
    except (NameError, TypeError):
        return None
    return hint if isinstance(hint, type) else None


def _validate_processor(obj: Callable[[T], Any]) -> Callable[[T], Any]:
    """Validate a processor.

    Processors must be a callable that accepts at least one argument (excluding
    keyword-only arguments).
    """
    if not callable(obj):
        raise ValueError(f"Processors must be callable. Got {obj!r}")
    co: CodeType | None = getattr(obj, "__code__", None)
    if not co:
        # without a code object the arity cannot be checked
        return obj
    if co.co_argcount < 1 and not (co.co_flags & CO_VARARGS):
        name = getattr(obj, "__name__", None) or obj
        raise ValueError(
            f"Processors must take at least one argument. {name!r} takes none."
        )
    return obj


# create the global store
Store._instances[_GLOBAL] = GLOBAL_STORE = Store(_GLOBAL)
