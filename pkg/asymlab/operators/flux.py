from abc import ABC, abstractmethod


class Flux(ABC):
    """
    Abstract base class for the flux-magnitude functions `A` of the operator class S.

    An operator `Q(u) = div(A(|∇u|)/|∇u| ∇u)` is fully described by its flux
    `A` and the structural constants bounding it:

        A(0) = 0 and A'(s) > 0 for s > 0
        A(s) <= C (s^(p-1) + 1) for every s > 0
        A(s) >  D s^q on [0, delta0]

    Subclasses implement `a` and `a_prime` on numpy arrays (or scalars) and
    declare the constants. Declared constants are verified, never inferred.
    """

    @abstractmethod
    def __init__(self, flux_conf):
        """
        Initializes the flux object.

        Args:
            flux_conf (dict): The parameters of the flux (e.g. `{"p": 3}`).
        """
        pass

    @property
    def name(self):
        return self._name

    @name.setter
    def name(self, value):
        self._name = value

    @abstractmethod
    def a(self, s):
        """
        Evaluate the flux magnitude `A(s)`.

        Args:
            s (float | numpy.ndarray): Gradient magnitudes, s >= 0.

        Returns:
            float | numpy.ndarray: `A(s)`, same shape as `s`.
        """
        pass

    @abstractmethod
    def a_prime(self, s):
        """
        Evaluate the derivative `A'(s)` for s > 0.
        """
        pass

    @property
    @abstractmethod
    def constants(self):
        """
        Returns:
            dict: `growth_C`, `growth_p`, `lower_q`, `lower_delta0`, `lower_Dbar`.
        """
        pass

    @property
    def sup(self):
        """Declared `sup A` (may be `math.inf`), or None when unknown."""
        return None

    @property
    def ratio_at_zero(self):
        """
        Limit of `A(s)/s` as s -> 0+, or None when it is infinite.

        Used when the gradient degenerates inside a divergence stencil.
        """
        return None

    def params(self):
        return {}

    def __str__(self):
        return f"Flux: {self.name}"
