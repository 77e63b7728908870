"""scikit-learn style front end to the LGB anonymizer."""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

import numpy as np

from . import __version__
from .generalization import GENERALIZERS
from .pipeline import assemble, bucketize_table
from .validation import check_l, check_mode, check_positive_int, check_table, resolve_l


class LGBAnonymizer(TransformerMixin, BaseEstimator):
    """Anonymize a microdata table by local generalization and bucketization.

    Parameters
    ----------
    k : int, default=5
        Minimum size of every local equivalence group.
    l : int, default=5
        Minimum size of every local bucket; values never repeat inside a bucket.
    mode : {"mdp", "ncp"}, default="mdp"
        "mdp" cuts groups at medians along the widest attribute, "ncp" bisects
        greedily around far-apart seed tuples to keep NCP low.
    schema : list, optional
        Attribute schemas, needed when fitting on a DataFrame.
    hierarchies : dict, optional
        ``attribute -> Hierarchy`` for categorical attributes.
    l_per_attribute : dict, optional
        Overrides ``l`` for individual attributes.

    Attributes
    ----------
    table_ : Table
    groups_ : list of LocalEquivalenceGroup
    buckets_ : dict
        ``attribute -> list of LocalBucket``.
    published_ : PublishedTable

    Examples
    --------
    >>> anon = LGBAnonymizer(k=2, l=2).fit(table)      # doctest: +SKIP
    >>> anon.published_.groups                          # doctest: +SKIP
    """

    def __init__(self, k=5, l=5, mode="mdp", schema=None, hierarchies=None, l_per_attribute=None):
        self.k = k
        self.l = l
        self.mode = mode
        self.schema = schema
        self.hierarchies = hierarchies
        self.l_per_attribute = l_per_attribute

    def fit(self, X, y=None, mask=None):
        """Partition ``X`` into groups and buckets.

        ``X`` is a Table or a DataFrame (with ``mask`` and the ``schema`` parameter).
        ``y`` is ignored.
        """
        table = check_table(X, mask, self.schema, self.hierarchies)
        k = check_positive_int(self.k, "k")
        mode = check_mode(self.mode)
        l = check_l(resolve_l(check_positive_int(self.l, "l"), self.l_per_attribute, table), table)

        self.table_ = table
        self.buckets_ = bucketize_table(table, l)
        self.groups_ = GENERALIZERS[mode](table, k)
        self.published_ = assemble(table, self.groups_, self.buckets_,
                                   {"k": k, "l": l, "mode": mode, "seed": None, "tool-version": __version__})
        self.n_features_in_ = len(table.schema)
        self.feature_names_in_ = np.array(table.names, dtype=object)
        return self

    def transform(self, X, mask=None):
        """Published rows as a DataFrame (id, GID, rendered cells).

        Anonymization is specific to the fitted table, so ``X`` must be that
        same table.
        """
        check_is_fitted(self, "published_")
        table = check_table(X, mask, self.schema, self.hierarchies)
        if table != self.table_:
            raise ValueError("LGBAnonymizer can only transform the table it was fitted on")
        return self.published_.to_frame()

    def fit_transform(self, X, y=None, mask=None):
        return self.fit(X, y, mask=mask).published_.to_frame()

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "published_")
        return np.array(["id", "GID", *self.table_.names], dtype=object)
