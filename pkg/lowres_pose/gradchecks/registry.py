"""Registry of named gradient-check cases."""

from typing import Any, Callable, Dict, List, Optional

import numpy as np

from lowres_pose.autodiff.gradcheck import GradcheckResult

CaseFn = Callable[[np.random.Generator], GradcheckResult]


class GradcheckRegistry:
    """Named gradcheck cases with metadata (covered component, group)."""

    def __init__(self):
        self._cases: Dict[str, CaseFn] = {}
        self._metadata: Dict[str, Dict[str, Any]] = {}

    def register(
        self,
        name: str,
        func: CaseFn,
        metadata: Optional[Dict[str, Any]] = None,
    ) -> None:
        if name in self._cases:
            raise ValueError(f"Gradcheck case '{name}' already registered")
        self._cases[name] = func
        self._metadata[name] = metadata or {}

    def get(self, name: str) -> Optional[CaseFn]:
        return self._cases.get(name)

    def get_metadata(self, name: str) -> Dict[str, Any]:
        return self._metadata.get(name, {})

    def list_cases(self, group: Optional[str] = None) -> list[str]:
        if group is None:
            return list(self._cases)
        return [n for n in self._cases if self._metadata[n].get("group") == group]

    def run(self, name: str, rng: np.random.Generator) -> GradcheckResult:
        func = self.get(name)
        if func is None:
            raise KeyError(f"Unknown gradcheck case '{name}'")
        result = func(rng)
        result.name = name
        return result

    def run_all(
        self, repeats: int = 4, seed: int = 0, group: Optional[str] = None
    ) -> List[GradcheckResult]:
        """Every case ``repeats`` times, each repeat on its own seeded generator."""
        results = []
        for name in self.list_cases(group):
            for r in range(repeats):
                results.append(self.run(name, np.random.default_rng([seed, r])))
        return results


# Global case registry
_registry: Optional[GradcheckRegistry] = None


def get_case_registry() -> GradcheckRegistry:
    """Global registry, populated with the built-in cases on first use."""
    global _registry
    if _registry is None:
        _registry = GradcheckRegistry()
        from lowres_pose.gradchecks.cases import register_builtin_cases

        register_builtin_cases(_registry)
    return _registry


def register_case(group: str, **metadata: Any) -> Callable[[CaseFn], CaseFn]:
    """Decorator collecting a case function for :func:`register_builtin_cases`."""

    def wrap(func: CaseFn) -> CaseFn:
        func.gradcheck_metadata = {"group": group, **metadata}  # type: ignore[attr-defined]
        return func

    return wrap
