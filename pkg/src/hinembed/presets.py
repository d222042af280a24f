"""Bibliographic (author/paper/venue) metagraph and metapaths."""
from .metagraph import chain_from_metapath, parse_metagraph

# authors linked through a shared venue or a shared co-author
AUTHOR_METAGRAPH_TEXT = """\
metagraph apvpa_apapa
layers 5
node a1 : A @ 1
node p1 : P @ 2
node v  : V @ 3
node a2 : A @ 3
node p2 : P @ 4
node a3 : A @ 5
edge a1 -> p1 : write
edge p1 -> v  : publish^-1
edge p1 -> a2 : write^-1
edge v  -> p2 : publish
edge a2 -> p2 : write
edge p2 -> a3 : write^-1
"""

VENUE_METAPATH = ("A", "P", "V", "P", "A")
COAUTHOR_METAPATH = ("A", "P", "A", "P", "A")


def author_metagraph():
    return parse_metagraph(AUTHOR_METAGRAPH_TEXT)


def venue_metapath():
    return chain_from_metapath(VENUE_METAPATH, name="apvpa")


def coauthor_metapath():
    return chain_from_metapath(COAUTHOR_METAPATH, name="apapa")
