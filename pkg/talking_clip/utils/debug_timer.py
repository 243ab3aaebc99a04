import functools
import logging
import time
from typing import Any, Callable, TypeVar, cast

logger = logging.getLogger("perf")

_F = TypeVar("_F", bound=Callable[..., Any])


def time_function(msg: str) -> Callable[[_F], _F]:
    """Decorator for timing heavy phases."""

    def wrapper(func: _F) -> _F:
        @functools.wraps(func)
        def decorated(*args: Any, **kwargs: Any) -> Any:
            start_time = time.perf_counter()
            retval = func(*args, **kwargs)
            logger.debug("%s took %.3f s", msg, time.perf_counter() - start_time)
            return retval

        return cast(_F, decorated)

    return wrapper
