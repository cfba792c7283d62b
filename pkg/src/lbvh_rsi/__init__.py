"""Batched segment / triangle-mesh intersection on a linear BVH."""

from .geometry import Aabb, Hit, InvalidGeometryError, Mesh, Segment, SegmentBatch, moller_trumbore
from .lbvh import Bvh, BvhIntegrityError, IntegrityReport, NodeRef, build_bvh, bvh_construct, bvh_reset, bvh_validate
from .morton import build_sorted_order, morton_encode
from .oracle import brute_force
from .query import (HitResult, QueryConfig, TimingBreakdown, query, query_barycentric, query_boolean,
                    query_intercept_count, run_pipeline)

__all__ = [
    "Aabb", "Bvh", "BvhIntegrityError", "Hit", "HitResult", "IntegrityReport", "InvalidGeometryError",
    "Mesh", "NodeRef", "QueryConfig", "Segment", "SegmentBatch", "TimingBreakdown", "brute_force",
    "build_bvh", "build_sorted_order", "bvh_construct", "bvh_reset", "bvh_validate", "moller_trumbore",
    "morton_encode", "query", "query_barycentric", "query_boolean", "query_intercept_count", "run_pipeline",
]
__version__ = "0.1.0"
