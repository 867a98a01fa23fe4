import logging
import threading
from contextlib import contextmanager
from typing import (
    Any,
    Dict,
    Iterator,
    List,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np

from fairsearch.exceptions import GradientError, InvalidArgument

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, float, int, Sequence[Any]]

_SUPPORTED_DTYPES = (np.float32, np.float64)
_default_dtype: type = np.float64
_local = threading.local()


def get_default_dtype() -> type:
    return _default_dtype


def set_default_dtype(dtype: Union[str, type]) -> None:
    global _default_dtype
    resolved = np.dtype(dtype).type
    if resolved not in _SUPPORTED_DTYPES:
        raise InvalidArgument(
            f"Unsupported precision {dtype!r}, use float32 or float64"
        )
    _default_dtype = resolved


@contextmanager
def precision(dtype: Union[str, type]) -> Iterator[None]:
    """
    Temporarily switch the floating precision of newly created tensors

    :param dtype: Union[str, type] - float32 or float64
    """
    previous = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


class Tensor:
    """
    Dense n-dimensional array with an optional gradient requirement.

    Tensors produced by a :class:`Function` while a :class:`Tape` is
    active are recorded on that tape and can be differentiated.
    """

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        name: Optional[str] = None,
        dtype: Optional[type] = None,
    ):
        self.data: np.ndarray = np.asarray(
            data, dtype=dtype or get_default_dtype()
        )
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.size != 1:
            raise InvalidArgument(
                f"item() needs a single element, got shape {self.shape}"
            )
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return (
            f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}, "
            f"requires_grad={self.requires_grad}{label})"
        )

    def __add__(self, other: "Tensor") -> "Tensor":
        from fairsearch.tensor.functional import add

        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other: Union["Tensor", float, int]) -> "Tensor":
        from fairsearch.tensor.functional import mul, scale

        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        from fairsearch.tensor.functional import scale

        return scale(self, -1.0)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return self + (-other)

    def sum(self) -> "Tensor":
        from fairsearch.tensor.functional import sum_all

        return sum_all(self)

    def mean(self) -> "Tensor":
        from fairsearch.tensor.functional import mean_all

        return mean_all(self)

    def reshape(self, *shape: int) -> "Tensor":
        from fairsearch.tensor.functional import reshape

        return reshape(self, shape)


class Function:
    """
    Base class of every differentiable primitive.

    Subclasses implement ``forward`` on raw arrays and ``backward``, which
    maps the adjoint of the output onto one adjoint per input (``None``
    for inputs that receive no gradient).
    """

    name = "function"

    def __init__(self, *inputs: Tensor):
        self.inputs = inputs

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError

    def backward(
        self, grad: np.ndarray
    ) -> Sequence[Optional[np.ndarray]]:
        raise NotImplementedError

    @classmethod
    def apply(cls, *inputs: Tensor, **kwargs: Any) -> Tensor:
        function = cls(*inputs)
        out_data = function.forward(*(t.data for t in inputs), **kwargs)
        requires_grad = any(t.requires_grad for t in inputs)
        out = Tensor(
            out_data, requires_grad=requires_grad, dtype=out_data.dtype
        )
        tape = current_tape()
        if requires_grad and tape is not None:
            tape.record(function, out)
        return out


class TapeNode:
    def __init__(self, function: Function, output: Tensor):
        self.function = function
        self.output = output


class Tape:
    """
    Ordered record of the primitives executed while the tape is active.

    Use as a context manager around a forward pass, then call
    :meth:`backward` on a scalar result.
    """

    def __init__(self):
        self.nodes: List[TapeNode] = []
        self._produced: Dict[int, Tensor] = {}

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, function: Function, output: Tensor) -> None:
        self.nodes.append(TapeNode(function, output))
        self._produced[id(output)] = output

    def backward(self, root: Tensor) -> Dict[Tensor, np.ndarray]:
        """
        Reverse-mode sweep over the tape

        :param root: Tensor - scalar result recorded on this tape
        :return: Dict[Tensor, np.ndarray] - adjoint of every
        requires_grad leaf on the history of root
        """
        if root.size != 1 or root.ndim != 0:
            raise GradientError(
                f"backward needs a scalar root, got shape {root.shape}"
            )
        if not root.requires_grad:
            return {}
        if id(root) not in self._produced:
            return {root: np.ones_like(root.data)}
        grads: Dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
        leaves: Dict[int, Tensor] = {}
        for node in reversed(self.nodes):
            grad = grads.pop(id(node.output), None)
            if grad is None:
                continue
            input_grads = node.function.backward(grad)
            for tensor, input_grad in zip(node.function.inputs, input_grads):
                if input_grad is None or not tensor.requires_grad:
                    continue
                if input_grad.shape != tensor.shape:
                    raise GradientError(
                        f"{node.function.name}: adjoint shape "
                        f"{input_grad.shape} does not match input shape "
                        f"{tensor.shape}"
                    )
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + input_grad
                else:
                    grads[key] = input_grad
                if key not in self._produced:
                    leaves[key] = tensor
        return {tensor: grads[key] for key, tensor in leaves.items()}


def _tape_stack() -> List[Tape]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = []
        _local.stack = stack
    return stack


def current_tape() -> Optional[Tape]:
    stack = _tape_stack()
    return stack[-1] if stack else None


def backward(tape: Tape, root: Tensor) -> Dict[Tensor, np.ndarray]:
    return tape.backward(root)


def parameter(data: ArrayLike, name: Optional[str] = None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def zeros(shape: Sequence[int]) -> Tensor:
    return Tensor(np.zeros(tuple(shape), dtype=get_default_dtype()))
