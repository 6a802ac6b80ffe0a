"""Computable blender-horseshoe theory for symbolic skew-products."""

from .blender import (
    BlenderCertificate, HorizontalDisk, IntersectionResult, brute_force_words, certify_blender, certify_cu_blender,
    disk_intersect, embedded_disk_intersect, sample_backward_divergence,
)
from .boxes import Box, BoxSet, hausdorff, hausdorff_interval
from .cycles import (
    CycleScenario, MixingScenario, blender_activation, default_cycle_scenario, default_mixing_scenario,
    density_check, mixing_witness, verify_cycle, verify_mixing,
)
from .fiber import (
    DomainEscape, FiberMap, SkewProduct, backward_orbit, compose_backward, compose_forward, forward_orbit,
    inverse_skew_product, perturb,
)
from .ifs import (
    IFS, CoveringCertificate, covering_check, hutchinson_attractor, lebesgue_lower_bound, orbit, translation_family,
)
from .invariant_graph import InvariantGraph, continuity_probe, evaluate_graph, graph_image, periodic_points
from .laminations import StableGraph, UnstableGraph, invariance_check, stable_graph_eval, unstable_graph_eval
from .symbolic import BiSequence, Cylinder, RelativeCylinder, conjugate, metric, shift

__all__ = [name for name in dir() if not name.startswith("_")]
