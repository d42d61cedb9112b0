"""Vocab tests: id layout, strict/lenient lookups, serialization."""

import pytest

from pinyinlm.lexicon import ABBREV, PERFECT, Lexicon, PinyinToken
from pinyinlm.vocab import Vocab, VocabError, parse_pinyin_token_text, pinyin_token_text


@pytest.fixture()
def lex():
    return Lexicon(
        [
            ("我", "wo"),
            ("们", "men"),
            ("安", "an"),
            ("啊", "a"),
            ("中", "zhong"),
        ]
    )


@pytest.fixture()
def vocab(lex):
    return Vocab.from_lexicon(lex)


def test_id_layout(vocab):
    assert (vocab.bos_id, vocab.sep_id, vocab.unk_id) == (0, 1, 2)
    assert vocab.n_specials == 3
    assert vocab.char_id("我") == 3
    assert vocab.char_id("们") == 4
    assert vocab.n_chars == 5
    # pinyin block: perfect tokens first, in lexicon order, then abbrev keys
    assert vocab.pinyin_texts[:5] == ("p:wo", "p:men", "p:an", "p:a", "p:zhong")
    assert vocab.pinyin_token_id(PinyinToken(PERFECT, "wo")) == 3 + 5
    assert vocab.n_tokens == 3 + 5 + len(vocab.pinyin_texts)


def test_colliding_texts_stay_distinct(vocab):
    perfect_a = vocab.pinyin_token_id(PinyinToken(PERFECT, "a"))
    abbrev_a = vocab.pinyin_token_id(PinyinToken(ABBREV, "a"))
    assert perfect_a != abbrev_a


def test_strict_and_lenient_char_lookup(vocab):
    assert vocab.encode_char("我") == vocab.char_id("我")
    assert vocab.encode_char("，") == vocab.unk_id
    with pytest.raises(VocabError):
        vocab.char_id("，")


def test_head_block(vocab):
    assert vocab.head_size == vocab.n_chars
    for char in "我们安啊中":
        token_id = vocab.char_id(char)
        assert vocab.is_char_id(token_id)
        assert vocab.char_for_head(vocab.head_index(token_id)) == char
    assert not vocab.is_char_id(vocab.bos_id)
    with pytest.raises(VocabError):
        vocab.head_index(vocab.sep_id)


def test_pinyin_embed_channel(vocab):
    assert vocab.pinyin_embed_id(None) == 0
    first = vocab.pinyin_embed_id(PinyinToken(PERFECT, "wo"))
    assert first == 1
    assert vocab.pinyin_embed_size == vocab.n_pinyin + 1
    with pytest.raises(VocabError):
        vocab.pinyin_embed_id(PinyinToken(PERFECT, "shi"))


def test_extra_chars_append_without_duplicates(lex):
    vocab = Vocab.from_lexicon(lex, extra_chars=["，", "我", "1", "，"])
    assert vocab.n_chars == 7
    assert vocab.char_id("，") == 3 + 5
    assert vocab.char_id("1") == 3 + 6


def test_token_text_round_trip(vocab):
    for token_id in range(vocab.n_tokens):
        text = vocab.token_text(token_id)
        assert isinstance(text, str) and text
    with pytest.raises(VocabError):
        vocab.token_text(vocab.n_tokens)


def test_json_round_trip(lex):
    vocab = Vocab.from_lexicon(lex, extra_chars=["，"])
    payload = vocab.to_json()
    assert payload == payload.encode("ascii").decode("ascii")
    restored = Vocab.from_json(payload)
    assert restored == vocab
    assert restored.pinyin_token_id(PinyinToken(ABBREV, "zh")) == vocab.pinyin_token_id(
        PinyinToken(ABBREV, "zh")
    )


def test_from_json_rejects_garbage():
    with pytest.raises(VocabError):
        Vocab.from_json("not json")
    with pytest.raises(VocabError):
        Vocab.from_json('{"chars": "我"}')


def test_duplicate_entries_rejected():
    with pytest.raises(VocabError):
        Vocab(["我", "我"], [])
    with pytest.raises(VocabError):
        Vocab(["我"], ["p:wo", "p:wo"])
    with pytest.raises(VocabError):
        Vocab(["我们"], [])
    with pytest.raises(VocabError):
        Vocab(["我"], ["wo"])  # missing mode prefix


def test_pinyin_token_text_round_trip():
    for token in [PinyinToken(PERFECT, "zhong"), PinyinToken(ABBREV, "zh")]:
        assert parse_pinyin_token_text(pinyin_token_text(token)) == token
