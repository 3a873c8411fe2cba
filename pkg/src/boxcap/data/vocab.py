"""
Text codec for boxcap.

Tokenization and the vocabulary shared by product info and captions. CJK text
is split into characters, everything else on whitespace.
"""

import logging
from collections import Counter
from pathlib import Path

from ..utils.constants import SpecialTokens
from ..utils.errors import DatasetError

logger = logging.getLogger(__name__)


def _is_cjk(char):
    code = ord(char)
    return (
        0x3400 <= code <= 0x4DBF
        or 0x4E00 <= code <= 0x9FFF
        or 0xF900 <= code <= 0xFAFF
        or 0x3000 <= code <= 0x303F
        or 0xFF00 <= code <= 0xFFEF
    )


def tokenize(text):
    """
    Split text into atomic units.

    Whitespace separates tokens; inside a chunk every CJK character is a token
    of its own while runs of other characters stay together.

    Args:
        text (str): Text to split

    Returns:
        list: Token strings
    """
    tokens = []
    for chunk in text.split():
        run = []
        for char in chunk:
            if _is_cjk(char):
                if run:
                    tokens.append("".join(run))
                    run = []
                tokens.append(char)
            else:
                run.append(char)
        if run:
            tokens.append("".join(run))
    return tokens


def detokenize(tokens):
    """Join tokens, leaving no space next to CJK characters."""
    pieces = []
    previous = None
    for token in tokens:
        if previous is not None and not (_is_cjk(previous[-1]) or _is_cjk(token[0])):
            pieces.append(" ")
        pieces.append(token)
        previous = token
    return "".join(pieces)


class Vocabulary:
    """
    Token <-> id bijection with the special tokens at fixed low ids.

    PAD is id 0, followed by SOS, EOS, SEP and UNK.
    """

    def __init__(self, tokens):
        """
        Initialize the vocabulary.

        Args:
            tokens (list): All tokens in id order, specials first
        """
        specials = SpecialTokens.get_tokens()
        if list(tokens[: len(specials)]) != specials:
            raise DatasetError("vocabulary must start with the special tokens")
        if len(set(tokens)) != len(tokens):
            raise DatasetError("vocabulary contains duplicate tokens")

        self.tokens = list(tokens)
        self.index = {token: i for i, token in enumerate(self.tokens)}

        self.pad_id = self.index[SpecialTokens.PAD]
        self.sos_id = self.index[SpecialTokens.SOS]
        self.eos_id = self.index[SpecialTokens.EOS]
        self.sep_id = self.index[SpecialTokens.SEP]
        self.unk_id = self.index[SpecialTokens.UNK]
        self.special_ids = frozenset(range(len(specials)))

    def __len__(self):
        return len(self.tokens)

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def token_to_id(self, token):
        """Get the id of a token, UNK when absent."""
        return self.index.get(token, self.unk_id)

    def id_to_token(self, token_id):
        """Get the token of an id."""
        return self.tokens[token_id]

    def encode(self, text):
        """
        Encode text as token ids.

        Args:
            text (str): Text to encode

        Returns:
            list: Token ids; unknown units map to UNK
        """
        return [self.token_to_id(token) for token in tokenize(text)]

    def decode(self, ids, skip_special=False):
        """
        Decode token ids back to text.

        Args:
            ids (iterable): Token ids
            skip_special (bool): Drop PAD/SOS/EOS/SEP/UNK ids

        Returns:
            str: Decoded text
        """
        tokens = []
        for token_id in ids:
            token_id = int(token_id)
            if skip_special and token_id in self.special_ids:
                continue
            tokens.append(self.tokens[token_id])
        return detokenize(tokens)

    def save(self, path):
        """Write one token per line; the line number is the id."""
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        """Read a vocabulary written by save()."""
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(lines)


def build_vocab(cards):
    """
    Build a vocabulary from the captions and product info of a corpus.

    Tokens are ordered by descending frequency, then lexicographically, after
    the special tokens.

    Args:
        cards (iterable): Cards to scan

    Returns:
        Vocabulary: The vocabulary

    Raises:
        DatasetError: If the corpus is empty
    """
    counts = Counter()
    n_cards = 0
    for card in cards:
        n_cards += 1
        counts.update(tokenize(card.info))
        for caption in card.captions:
            counts.update(tokenize(caption))
    if n_cards == 0:
        raise DatasetError("cannot build a vocabulary from an empty corpus")

    specials = SpecialTokens.get_tokens()
    for special in specials:
        counts.pop(special, None)

    ordered = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    vocab = Vocabulary(specials + [token for token, _ in ordered])
    logger.debug("Built vocabulary of %d tokens from %d cards", len(vocab), n_cards)
    return vocab
