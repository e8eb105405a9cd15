from __future__ import annotations

from textwrap import indent
from typing import TYPE_CHECKING, Any, Callable

from ._store import RegistrationContext, Store

if TYPE_CHECKING:
    from collections.abc import Iterator

    from ._dynamics import RhsFunction
    from ._store import (
        Processor,
        ProcessorIterable,
        ProcessorVar,
        SolverMapping,
        SolverVar,
        T,
    )

_STORE_PARAM = """
store : Union[Store, str, None]
    The store instance or store name to use, if not provided the
    global store is used.
"""
_STORE_PARAM = indent(_STORE_PARAM.strip(), "        ")


def _add_store_to_doc(func: T) -> T:
    new_doc: list[str] = []

    store_doc: str = getattr(Store, func.__name__).__doc__  # type: ignore
    for n, line in enumerate(store_doc.splitlines()):
        if line.lstrip().startswith("Returns"):
            new_doc.insert(n - 1, _STORE_PARAM)
        new_doc.append(line.replace(" store.", " ").replace("@store.", "@"))

    func.__doc__ = "\n".join(new_doc)
    return func


def _store_or_global(store: str | Store | None = None) -> Store:
    return store if isinstance(store, Store) else Store.get_store(store)


@_add_store_to_doc
def register(
    *,
    solvers: SolverMapping | None = None,
    processors: ProcessorIterable | None = None,
    store: str | Store | None = None,
) -> RegistrationContext:
    """Register solvers and/or processors in `store` or the global store."""
    return _store_or_global(store).register(solvers=solvers, processors=processors)


@_add_store_to_doc
def register_solver(
    name: str, solver: RhsFunction, store: str | Store | None = None
) -> RegistrationContext:
    """Register a solver in `store` or the global store."""
    return _store_or_global(store).register_solver(name, solver)


@_add_store_to_doc
def register_processor(
    processor: Processor,
    record_type: type | None = None,
    weight: float = 0,
    store: str | Store | None = None,
) -> RegistrationContext:
    """Register a processor in `store` or the global store."""
    return _store_or_global(store).register_processor(
        processor, record_type=record_type, weight=weight
    )


@_add_store_to_doc
def mark_solver(
    func: SolverVar | None = None,
    *,
    name: str | None = None,
    store: str | Store | None = None,
) -> Callable[[SolverVar], SolverVar] | SolverVar:
    """Decorate a solver for registration in `store` or the global store."""
    return _store_or_global(store).mark_solver(func, name=name)  # type: ignore


@_add_store_to_doc
def mark_processor(
    func: ProcessorVar | None = None,
    *,
    record_type: type | None = None,
    weight: float = 0,
    store: str | Store | None = None,
) -> Callable[[ProcessorVar], ProcessorVar] | ProcessorVar:
    """Decorate a processor for registration in `store` or the global store."""
    return _store_or_global(store).mark_processor(  # type: ignore
        func, record_type=record_type, weight=weight
    )


@_add_store_to_doc
def get_solver(name: str, store: str | Store | None = None) -> RhsFunction:
    """Look up a solver by name in `store` or the global store."""
    return _store_or_global(store).get_solver(name)


@_add_store_to_doc
def iter_processors(
    record_type: type, store: str | Store | None = None
) -> Iterator[Callable[[Any], Any]]:
    """Iterate the processors of `record_type` in `store` or the global store."""
    return _store_or_global(store).iter_processors(record_type)


@_add_store_to_doc
def process(
    record: Any,
    *,
    first_processor_only: bool = False,
    raise_exception: bool = False,
    store: str | Store | None = None,
) -> None:
    """Process `record` with the processors of `store` or the global store."""
    return _store_or_global(store).process(
        record,
        first_processor_only=first_processor_only,
        raise_exception=raise_exception,
    )
