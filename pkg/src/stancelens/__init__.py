"""stancelens: retweet-based stance clustering and valence analysis.

Filter a tweet corpus, cluster users into political camps from the
accounts they retweet (cosine k-NN -> 2-D embedding -> mean-shift), and
surface each camp's distinctive hashtags, accounts, and URLs.
"""

__version__ = "0.1.0"

from .cluster import FlatMeanShift, StanceAssignment, UNCLUSTERED
from .embed import NeighborEmbedding
from .errors import ConfigError, DataError, NumericError, StanceLensError
from .graph import KnnGraph, UserRetweetMatrix

__all__ = [
    "__version__",
    "FlatMeanShift",
    "NeighborEmbedding",
    "StanceAssignment",
    "UNCLUSTERED",
    "KnnGraph",
    "UserRetweetMatrix",
    "ConfigError",
    "DataError",
    "NumericError",
    "StanceLensError",
]
