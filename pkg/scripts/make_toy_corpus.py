#!/usr/bin/env python3
"""Regenerates the toy corpora under tests/data/toy/ from the pools below.

Five fixtures, all composed from characters the bundled lexicon can read so
every sampled window is decodable:

  overfit_200.txt   fixed 200 short sentences for the overfit experiment;
                    includes 20 sentences forming 10 minimal pairs whose
                    differing character shares an initial but not a syllable
                    (e.g. 看山/看书), so abbreviated input stays ambiguous
                    even for a model that memorized the corpus
  train_p7.txt      600 sentences for the ablation training runs, built from
                    selectional verb-object pairs whose objects collide on
                    the abbreviation key (喝水/喝茶/喝汤, 看山/看海/看云/看星),
                    so abbreviated decoding hinges on ranking same-key
                    characters by context rather than on frame memorization
  heldout_p7.txt    90 unseen sentences over the same pairs for evaluation
  wd_daily.txt      \
  wd_travel.txt      > three ~130-sentence domains with short/medium/long
  wd_work.txt       /  mixes so every (context, target) bucket is feasible

Each stage draws from its own seeded generator, so editing one section never
shifts the bytes another fixture gets.

Sentence bodies avoid internal punctuation: the dataset builder only samples
target windows over contiguous readable runs, and the 10+/10+ bucket needs
runs of twenty characters or more.
"""
from __future__ import annotations

import sys
from collections import Counter
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from pinyinlm.lexicon import default_lexicon_path, load_lexicon

OUT_DIR = Path(__file__).resolve().parents[1] / "tests" / "data" / "toy"

# -- fragment pools (every character must be readable; checked at the end) ----

SUBJECTS = ("我", "你", "他", "她", "我们", "你们", "他们", "老师", "学生",
            "妈妈", "爸爸", "孩子", "朋友", "医生", "护士", "大家", "同学")
TIMES = ("今天", "明天", "昨天", "早上", "晚上", "中午", "下午", "周末",
         "春天", "夏天", "秋天", "冬天", "每天", "现在", "假期")
PLACES = ("学校", "公园", "医院", "商店", "图书馆", "饭馆", "超市", "银行",
          "邮局", "公司", "车站", "机场", "家里", "楼下", "河边", "湖边",
          "海边", "山上", "城里", "花园")
CITIES = ("北京", "上海", "南京", "西安", "长城", "海南")
VERBS = ("看", "吃", "喝", "买", "做", "写", "读", "听", "画", "唱",
         "学", "找", "带", "洗", "煮", "拿", "修", "拍")
OBJECTS = ("书", "水", "茶", "饭", "菜", "鱼", "肉", "鸡蛋", "面包", "牛奶",
           "咖啡", "苹果", "西瓜", "米饭", "蔬菜", "衣服", "鞋子", "报纸",
           "照片", "故事", "歌", "画", "字", "饺子", "馒头", "蛋糕", "汤")
ACTIVITIES = ("跑步", "散步", "游泳", "跳舞", "唱歌", "睡觉", "休息", "上课",
              "考试", "开会", "聊天", "踢球", "打球", "锻炼", "运动", "上网",
              "洗澡", "做饭", "看电影", "听音乐", "玩游戏", "打扫房间")
ADJECTIVES = ("高兴", "快乐", "累", "忙", "饿", "渴", "漂亮", "干净", "舒服",
              "安静", "热闹", "好吃", "好看", "有趣", "便宜", "认真", "健康")
VEHICLES = ("火车", "汽车", "飞机", "船")
WORK_THINGS = ("报告", "计划", "文件", "邮件", "练习", "作文", "问题", "生字",
               "成绩", "会议")
SCHOOL_TOPICS = ("数学", "语文", "英语", "历史", "科学", "艺术", "音乐", "体育")

# Minimal pairs for the perfect-vs-abbreviated gap: within each pair the
# fourth-or-later character differs, shares its initial letter, and has a
# different full syllable, while the surrounding text is identical.
AMBIGUOUS_PAIRS = (
    ("他周末喜欢看山。", "他周末喜欢看书。"),          # shan / shu
    ("我们今天坐船去。", "我们今天坐车去。"),          # chuan / che
    ("晚上我们吃鱼肉。", "晚上我们吃羊肉。"),          # yu / yang
    ("下午他们去湖边玩。", "下午他们去河边玩。"),      # hu / he
    ("妈妈想去买米。", "妈妈想去买马。"),              # mi / ma
    ("公园里有很多树。", "公园里有很多水。"),          # shu / shui
    ("他很想买茶。", "他很想买车。"),                  # cha / che
    ("山上有很多鸟。", "山上有很多牛。"),              # niao / niu
    ("明天会有雨。", "明天会有云。"),                  # yu / yun
    ("她喜欢听歌。", "她喜欢跳舞。"),                  # ting / tiao
)


# Selectional pairs for the ablation corpora. Within one abbreviation key a
# selector maps to exactly one object, so the context always determines the
# right same-key character; across keys selectors may repeat (喝水/喝茶/喝汤
# stay distinguishable because the key itself differs).
SELECTIONAL = (
    # sh-key objects
    ("喝", "水"), ("读", "书"), ("洗", "手"), ("看", "山"),
    # ch-key objects
    ("喝", "茶"), ("坐", "车"), ("划", "船"), ("进", "城"),
    # m-key objects
    ("买", "米"), ("骑", "马"), ("开", "门"), ("吃", "面"), ("找", "猫"),
    # h-key objects
    ("买", "花"), ("生", "火"), ("看", "海"),
    # y-key objects
    ("吃", "鱼"), ("看", "云"), ("买", "药"), ("洗", "衣服"),
    # x-key objects
    ("看", "星星"), ("买", "鞋"), ("写", "信"),
    # t-key objects
    ("喝", "汤"),
    # j-key objects
    ("煮", "鸡蛋"), ("上", "街"),
)
WEATHER = ("下雨", "下雪")
# 商店/山上/城里 and the waterside places collide with selectional objects
# (在+sh, 看+h) and with each other, so the ablation corpus skips them.
PLACES_P7 = ("学校", "公园", "医院", "图书馆", "饭馆", "超市", "银行",
             "邮局", "公司", "车站", "机场", "家里", "楼下", "花园")
TIMES_P7 = tuple(t for t in TIMES if t != "每天")  # 每天/明天 share keys m t


def pick(rng: np.random.Generator, pool):
    return pool[int(rng.integers(0, len(pool)))]


def short_sentence(rng) -> str:
    roll = int(rng.integers(0, 4))
    if roll == 0:
        return f"{pick(rng, SUBJECTS)}{pick(rng, VERBS)}{pick(rng, OBJECTS)}。"
    if roll == 1:
        return f"{pick(rng, SUBJECTS)}很{pick(rng, ADJECTIVES)}。"
    if roll == 2:
        return f"{pick(rng, TIMES)}{pick(rng, SUBJECTS)}{pick(rng, ACTIVITIES)}。"
    return f"{pick(rng, SUBJECTS)}想{pick(rng, VERBS)}{pick(rng, OBJECTS)}。"


def medium_sentence(rng) -> str:
    roll = int(rng.integers(0, 4))
    if roll == 0:
        return (f"{pick(rng, TIMES)}{pick(rng, SUBJECTS)}在{pick(rng, PLACES)}"
                f"{pick(rng, VERBS)}{pick(rng, OBJECTS)}。")
    if roll == 1:
        return (f"{pick(rng, SUBJECTS)}和{pick(rng, SUBJECTS)}一起去"
                f"{pick(rng, PLACES)}{pick(rng, ACTIVITIES)}。")
    if roll == 2:
        return (f"{pick(rng, TIMES)}{pick(rng, SUBJECTS)}坐{pick(rng, VEHICLES)}"
                f"去{pick(rng, CITIES)}。")
    return (f"{pick(rng, SUBJECTS)}觉得{pick(rng, PLACES)}的{pick(rng, OBJECTS)}"
            f"很{pick(rng, ADJECTIVES)}。")


def long_sentence(rng) -> str:
    roll = int(rng.integers(0, 4))
    if roll == 0:
        return (f"{pick(rng, TIMES)}{pick(rng, SUBJECTS)}和{pick(rng, SUBJECTS)}"
                f"一起去{pick(rng, PLACES)}{pick(rng, VERBS)}{pick(rng, OBJECTS)}"
                f"然后回家{pick(rng, ACTIVITIES)}。")
    if roll == 1:
        return (f"{pick(rng, TIMES)}{pick(rng, SUBJECTS)}先在{pick(rng, PLACES)}"
                f"{pick(rng, VERBS)}{pick(rng, OBJECTS)}然后再去"
                f"{pick(rng, PLACES)}{pick(rng, ACTIVITIES)}。")
    if roll == 2:
        return (f"{pick(rng, SUBJECTS)}每天早上坐{pick(rng, VEHICLES)}去"
                f"{pick(rng, PLACES)}{pick(rng, ACTIVITIES)}下午回家"
                f"{pick(rng, VERBS)}{pick(rng, OBJECTS)}。")
    return (f"{pick(rng, TIMES)}{pick(rng, SUBJECTS)}觉得很{pick(rng, ADJECTIVES)}"
            f"因为{pick(rng, SUBJECTS)}带{pick(rng, SUBJECTS)}去{pick(rng, CITIES)}"
            f"{pick(rng, VERBS)}了{pick(rng, OBJECTS)}。")


def work_sentence(rng) -> str:
    roll = int(rng.integers(0, 3))
    if roll == 0:
        return (f"{pick(rng, TIMES)}{pick(rng, SUBJECTS)}在{pick(rng, PLACES)}"
                f"写{pick(rng, WORK_THINGS)}。")
    if roll == 1:
        return (f"{pick(rng, SUBJECTS)}准备{pick(rng, TIMES)}的"
                f"{pick(rng, SCHOOL_TOPICS)}{pick(rng, WORK_THINGS)}。")
    return (f"{pick(rng, TIMES)}{pick(rng, SUBJECTS)}先开会然后检查"
            f"{pick(rng, WORK_THINGS)}再和{pick(rng, SUBJECTS)}一起"
            f"准备{pick(rng, SCHOOL_TOPICS)}{pick(rng, WORK_THINGS)}。")


def pick_pairs(rng, n: int) -> list[tuple[str, str]]:
    ixs = rng.choice(len(SELECTIONAL), size=n, replace=False)
    return [SELECTIONAL[int(i)] for i in ixs]


def p7_short(rng) -> str:
    roll = int(rng.integers(0, 4))
    if roll == 3:
        return f"{pick(rng, TIMES_P7)}会{pick(rng, WEATHER)}。"
    sel, obj = pick_pairs(rng, 1)[0]
    if roll == 0:
        return f"{pick(rng, SUBJECTS)}{sel}{obj}。"
    if roll == 1:
        return f"{pick(rng, TIMES_P7)}{pick(rng, SUBJECTS)}{sel}{obj}。"
    return f"{pick(rng, SUBJECTS)}想{sel}{obj}。"


def p7_medium(rng) -> str:
    roll = int(rng.integers(0, 4))
    if roll == 0:
        sel, obj = pick_pairs(rng, 1)[0]
        return (f"{pick(rng, TIMES_P7)}{pick(rng, SUBJECTS)}在{pick(rng, PLACES_P7)}"
                f"{sel}{obj}。")
    if roll == 1:
        sel, obj = pick_pairs(rng, 1)[0]
        return f"{pick(rng, SUBJECTS)}和{pick(rng, SUBJECTS)}一起{sel}{obj}。"
    if roll == 2:
        (s1, o1), (s2, o2) = pick_pairs(rng, 2)
        return f"{pick(rng, TIMES_P7)}{pick(rng, SUBJECTS)}先{s1}{o1}然后{s2}{o2}。"
    sel, obj = pick_pairs(rng, 1)[0]
    return f"{pick(rng, SUBJECTS)}觉得{sel}{obj}很{pick(rng, ADJECTIVES)}。"


def p7_long(rng) -> str:
    # every branch stays at 20+ readable characters so the 10+/10+ bucket
    # always has feasible windows
    roll = int(rng.integers(0, 4))
    if roll == 0:
        (s1, o1), (s2, o2) = pick_pairs(rng, 2)
        return (f"{pick(rng, TIMES_P7)}{pick(rng, SUBJECTS)}和{pick(rng, SUBJECTS)}"
                f"先在{pick(rng, PLACES_P7)}{s1}{o1}然后{s2}{o2}再回家休息。")
    if roll == 1:
        (s1, o1), (s2, o2) = pick_pairs(rng, 2)
        return (f"{pick(rng, TIMES_P7)}{pick(rng, SUBJECTS)}先{s1}{o1}然后和"
                f"{pick(rng, SUBJECTS)}一起去{pick(rng, PLACES_P7)}{s2}{o2}"
                f"再回家吃饭。")
    if roll == 2:
        (s1, o1), (s2, o2), (s3, o3) = pick_pairs(rng, 3)
        return (f"{pick(rng, SUBJECTS)}和{pick(rng, SUBJECTS)}每天早上{s1}{o1}"
                f"下午{s2}{o2}晚上{s3}{o3}然后休息。")
    (s1, o1), (s2, o2) = pick_pairs(rng, 2)
    return (f"{pick(rng, TIMES_P7)}会{pick(rng, WEATHER)}{pick(rng, SUBJECTS)}"
            f"和{pick(rng, SUBJECTS)}在家先{s1}{o1}然后{s2}{o2}再休息。")


def generate(rng, counts_by_maker, taken: set[str]) -> list[str]:
    """counts_by_maker: list of (maker, how_many). Dedups against `taken`."""
    out = []
    for maker, want in counts_by_maker:
        made = 0
        while made < want:
            sentence = maker(rng)
            if sentence in taken:
                continue
            taken.add(sentence)
            out.append(sentence)
            made += 1
    return out


def main() -> int:
    lexicon = load_lexicon(default_lexicon_path())
    taken: set[str] = set(s for pair in AMBIGUOUS_PAIRS for s in pair)

    rng = np.random.default_rng(20260818)
    overfit = generate(rng, [(short_sentence, 120), (medium_sentence, 60)], taken)
    overfit += [s for pair in AMBIGUOUS_PAIRS for s in pair]
    assert len(overfit) == 200

    rng_p7 = np.random.default_rng(7180)
    train = generate(
        rng_p7, [(p7_short, 250), (p7_medium, 250), (p7_long, 100)], taken
    )
    heldout = generate(
        rng_p7, [(p7_short, 30), (p7_medium, 40), (p7_long, 20)], taken
    )

    rng_wd = np.random.default_rng(31)
    domains = {}
    for name, extra in (("wd_daily", medium_sentence),
                        ("wd_travel", long_sentence),
                        ("wd_work", work_sentence)):
        domains[name] = generate(
            rng_wd,
            [(short_sentence, 30), (medium_sentence, 40),
             (long_sentence, 45), (extra, 15)],
            taken,
        )

    files = {
        "overfit_200.txt": overfit,
        "train_p7.txt": train,
        "heldout_p7.txt": heldout,
        **{f"{name}.txt": sentences for name, sentences in domains.items()},
    }

    # every non-terminator character must be readable, else eval windows shrink
    for name, sentences in files.items():
        for sentence in sentences:
            for char in sentence.rstrip("。"):
                if char not in lexicon.char_to_readings:
                    raise SystemExit(f"{name}: unreadable character {char!r} in {sentence!r}")

    OUT_DIR.mkdir(parents=True, exist_ok=True)
    for name, sentences in files.items():
        path = OUT_DIR / name
        path.write_text("".join(s + "\n" for s in sentences), encoding="utf-8")
        lengths = Counter(
            "short" if len(s) <= 10 else "medium" if len(s) <= 20 else "long"
            for s in sentences
        )
        print(f"{name}\t{len(sentences)} sentences\t{dict(sorted(lengths.items()))}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
