"""Local generalization and bucketization for personalized privacy."""

__version__ = "0.1.0"

from .bucketizer import LocalBucket, ValuePairSet, check_condition, divide_buckets, local_bucketize, weighted_median
from .estimator import LGBAnonymizer
from .exceptions import InfeasibleError, InputError, LGBError
from .generalization import LocalEquivalenceGroup, generalize_mdp, generalize_ncp
from .microdata import AttributeSchema, Record, Table, load_table, qi_partition, qi_signature
from .pipeline import BucketRef, PublishedTable, deserialize, lgb, serialize
from .taxonomy import Hierarchy, Interval, Node, Predicate

__all__ = [
    "AttributeSchema",
    "BucketRef",
    "Hierarchy",
    "InfeasibleError",
    "InputError",
    "Interval",
    "LGBAnonymizer",
    "LGBError",
    "LocalBucket",
    "LocalEquivalenceGroup",
    "Node",
    "Predicate",
    "PublishedTable",
    "Record",
    "Table",
    "ValuePairSet",
    "check_condition",
    "deserialize",
    "divide_buckets",
    "generalize_mdp",
    "generalize_ncp",
    "lgb",
    "load_table",
    "local_bucketize",
    "qi_partition",
    "qi_signature",
    "serialize",
    "weighted_median",
]
