"""Finite-model étale groupoids: localization, bundles and pointed morphism
spaces, developable groupoids and extensions, plus closed geodesics on
developable orbifolds by twisted-loop energy descent."""

__version__ = "0.1.0"
