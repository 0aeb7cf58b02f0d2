"""Minimal estimator base implementing the get_params/set_params contract.

Constructor arguments are hyperparameters; ``fit`` learns state into
trailing-underscore attributes and returns ``self``. The contract matches what
``sklearn.base.clone`` expects, so these estimators compose with that
ecosystem without importing it.
"""

from __future__ import annotations

import inspect


class BaseEstimator:
    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [
            name
            for name, p in sig.parameters.items()
            if name != "self" and p.kind is not p.VAR_KEYWORD
        ]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(
                    f"invalid parameter {name!r} for {type(self).__name__}; "
                    f"valid parameters: {sorted(valid)}"
                )
            setattr(self, name, value)
        return self

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"

    def _check_fitted(self, attr: str):
        if not hasattr(self, attr):
            raise AttributeError(
                f"{type(self).__name__} instance is not fitted; call fit() first"
            )
