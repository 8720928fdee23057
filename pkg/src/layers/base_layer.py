from abc import ABC, abstractmethod
from typing import Dict, Iterator, Tuple

from ..autodiff import Tensor

# Named parameter tensors of one block
LayerParams = Dict[str, Tensor]


class BaseLayer(ABC):
    """Abstract base class for all layers and composite blocks"""

    def __init__(self, name: str):
        self.name = name
        self.params: LayerParams = {}
        self.children: Dict[str, "BaseLayer"] = {}

    @property
    def scope(self) -> str:
        """Top-level component name, used for tracing events"""
        return self.name.split('.')[0]

    def add_param(self, key: str, tensor: Tensor) -> Tensor:
        tensor.name = f"{self.name}.{key}"
        self.params[key] = tensor
        return tensor

    def add_child(self, key: str, layer: "BaseLayer") -> "BaseLayer":
        self.children[key] = layer
        return layer

    def named_parameters(self) -> Iterator[Tuple[str, Tensor]]:
        """Parameters under stable dotted names, in registration order"""
        for key, tensor in self.params.items():
            yield f"{self.name}.{key}", tensor
        for child in self.children.values():
            yield from child.named_parameters()

    def parameters(self):
        return [tensor for _, tensor in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(t.size for t in self.parameters())

    def zero_grad(self):
        for tensor in self.parameters():
            tensor.zero_grad()

    @abstractmethod
    def forward(self, *args, **kwargs):
        pass

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def __str__(self):
        return f"{type(self).__name__}({self.name}, params: {self.num_parameters()})"
