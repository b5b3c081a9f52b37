"""Scientific-humor scoring toolkit: corpus handling, surprisal and lexicon
features, classifiers, and ranking evaluation, with an ``iggy`` CLI."""

__version__ = "0.1.0"
