#!/usr/bin/env python3
"""Regenerates src/pinyinlm/data/lexicon_small.tsv from the curated table below.

The bundled lexicon is a hand-curated set of ~500 common characters with
toneless readings, ordered roughly by frequency so candidate classes come out
frequency-sorted. Heteronyms carry one row per reading, preferred reading
first. Full-coverage lexicons are user-supplied; this fixture exists so tests
and demos are hermetic.
"""
from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from pinyinlm.lexicon import split_syllable

# (character, reading) in preference order; a char may repeat with another
# reading (heteronyms). Grouped loosely by theme, common words first.
ENTRIES = """
我 wo | 们 men | 你 ni | 他 ta | 她 ta | 它 ta | 人 ren | 大 da | 家 jia
老 lao | 师 shi | 学 xue | 生 sheng | 医 yi | 妈 ma | 爸 ba | 朋 peng | 友 you
同 tong | 孩 hai | 子 zi | 自 zi | 己 ji
的 de | 的 di | 地 di | 地 de | 得 de | 得 dei | 很 hen | 都 dou | 都 du
和 he | 和 huo | 也 ye | 又 you | 就 jiu | 还 hai | 还 huan | 再 zai | 先 xian
才 cai | 只 zhi | 不 bu | 没 mei | 别 bie | 是 shi | 有 you | 在 zai
了 le | 了 liao | 着 zhe | 着 zhao | 过 guo | 吗 ma | 呢 ne | 吧 ba | 啊 a
这 zhe | 那 na | 哪 na | 什 shen | 什 shi | 么 me | 谁 shei | 谁 shui
怎 zen | 样 yang | 因 yin | 为 wei | 所 suo | 以 yi | 但 dan | 而 er
且 qie | 或 huo | 者 zhe | 如 ru | 果 guo | 虽 sui | 然 ran | 后 hou
前 qian | 现 xian | 正 zheng | 已 yi | 经 jing | 马 ma | 上 shang | 常 chang
每 mei | 非 fei | 特 te | 真 zhen | 太 tai | 最 zui | 更 geng | 比 bi
跟 gen | 对 dui | 从 cong | 向 xiang | 往 wang | 到 dao | 给 gei | 把 ba
被 bei | 让 rang | 要 yao | 想 xiang | 会 hui | 能 neng | 可 ke | 应 ying
该 gai | 喜 xi | 欢 huan | 爱 ai | 觉 jiao | 觉 jue | 知 zhi | 道 dao
希 xi | 望 wang | 相 xiang | 信 xin
今 jin | 天 tian | 明 ming | 昨 zuo | 早 zao | 晚 wan | 午 wu | 夜 ye
年 nian | 月 yue | 日 ri | 号 hao | 周 zhou | 末 mo | 星 xing | 期 qi
时 shi | 间 jian | 候 hou | 分 fen | 钟 zhong | 点 dian | 刻 ke
春 chun | 夏 xia | 秋 qiu | 冬 dong | 季 ji | 节 jie | 假 jia
北 bei | 京 jing | 海 hai | 南 nan | 西 xi | 东 dong | 中 zhong | 国 guo
外 wai | 公 gong | 园 yuan | 校 xiao | 院 yuan | 商 shang | 店 dian | 里 li
城 cheng | 市 shi | 图 tu | 书 shu | 馆 guan | 饭 fan | 机 ji | 场 chang
车 che | 站 zhan | 路 lu | 街 jie | 楼 lou | 层 ceng | 房 fang | 门 men
窗 chuang | 桌 zhuo | 椅 yi | 床 chuang | 灯 deng | 厨 chu | 厅 ting
卫 wei | 办 ban | 室 shi | 司 si | 银 yin | 行 xing | 行 hang | 邮 you
局 ju | 超 chao | 附 fu | 近 jin | 旁 pang | 边 bian | 方 fang
世 shi | 界 jie
去 qu | 来 lai | 回 hui | 走 zou | 跑 pao | 步 bu | 散 san | 坐 zuo
骑 qi | 开 kai | 飞 fei | 火 huo | 汽 qi | 船 chuan | 迟 chi | 离 li
进 jin | 出 chu | 看 kan | 见 jian | 听 ting | 说 shuo | 讲 jiang
读 du | 写 xie | 画 hua | 唱 chang | 歌 ge | 跳 tiao | 舞 wu | 玩 wan
游 you | 泳 yong | 踢 ti | 球 qiu | 打 da | 做 zuo | 作 zuo | 工 gong
习 xi | 休 xiu | 息 xi | 睡 shui | 醒 xing | 吃 chi | 喝 he | 买 mai
卖 mai | 送 song | 找 zhao | 带 dai | 穿 chuan | 洗 xi | 澡 zao | 用 yong
帮 bang | 助 zhu | 教 jiao | 练 lian | 考 kao | 试 shi | 问 wen | 答 da
告 gao | 诉 su | 认 ren | 识 shi | 懂 dong | 念 nian | 变 bian | 化 hua
接 jie | 发 fa | 响 xiang | 住 zhu | 检 jian | 查 cha | 运 yun | 动 dong
锻 duan | 炼 lian | 演 yan | 排 pai | 拍 pai | 照 zhao | 片 pian
等 deng | 放 fang | 拿 na | 搬 ban | 修 xiu | 关 guan | 推 tui | 拉 la
扫 sao | 切 qie | 煮 zhu | 烧 shao | 聊 liao | 笑 xiao | 哭 ku
完 wan | 结 jie | 束 shu | 准 zhun | 备 bei | 参 can | 加 jia | 计 ji
划 hua | 整 zheng | 收 shou | 祝 zhu | 贺 he | 刚 gang | 突 tu | 忽 hu
苹 ping | 瓜 gua | 面 mian | 包 bao | 咖 ka | 啡 fei | 牛 niu | 奶 nai
米 mi | 水 shui | 蔬 shu | 菜 cai | 鱼 yu | 肉 rou | 鸡 ji | 蛋 dan
茶 cha | 报 bao | 纸 zhi | 衣 yi | 服 fu | 鞋 xie | 票 piao | 粥 zhou
汤 tang | 饺 jiao | 馒 man | 头 tou | 甜 tian | 酸 suan | 辣 la | 咸 xian
香 xiang | 味 wei | 杯 bei | 瓶 ping | 碗 wan | 盘 pan | 筷 kuai | 刀 dao
电 dian | 视 shi | 脑 nao | 话 hua | 手 shou | 网 wang | 戏 xi | 影 ying
音 yin | 乐 le | 乐 yue | 钱 qian | 块 kuai | 元 yuan | 礼 li | 物 wu
消 xiao | 闻 wen | 故 gu | 糕 gao | 客 ke | 座 zuo | 满 man | 空 kong
好 hao | 坏 huai | 高 gao | 兴 xing | 快 kuai | 慢 man | 忙 mang | 累 lei
心 xin | 漂 piao | 亮 liang | 干 gan | 净 jing | 脏 zang | 新 xin | 旧 jiu
小 xiao | 多 duo | 少 shao | 冷 leng | 热 re | 晴 qing | 朗 lang | 暖 nuan
温 wen | 凉 liang | 长 chang | 长 zhang | 短 duan | 轻 qing | 重 zhong
远 yuan | 矮 ai | 低 di | 安 an | 静 jing | 闹 nao | 吵 chao | 怕 pa
饿 e | 渴 ke | 饱 bao | 困 kun | 梦 meng | 黑 hei | 白 bai | 红 hong
黄 huang | 蓝 lan | 绿 lv | 颜 yan | 色 se | 美 mei | 丽 li | 舒 shu
适 shi | 容 rong | 易 yi | 简 jian | 单 dan | 错 cuo | 难 nan | 贵 gui
便 bian | 便 pian | 宜 yi
一 yi | 二 er | 三 san | 四 si | 五 wu | 六 liu | 七 qi | 八 ba | 九 jiu
十 shi | 百 bai | 千 qian | 万 wan | 零 ling | 两 liang | 半 ban | 个 ge
条 tiao | 张 zhang | 件 jian | 辆 liang | 本 ben | 支 zhi | 双 shuang
位 wei | 些 xie | 第 di
脚 jiao | 眼 yan | 睛 jing | 嘴 zui | 耳 er | 朵 duo | 脸 lian | 身 shen
体 ti | 健 jian | 康 kang | 病 bing | 药 yao | 疼 teng | 感 gan | 冒 mao
护 hu | 士 shi | 狗 gou | 猫 mao | 鸟 niao | 花 hua | 草 cao | 树 shu
山 shan | 河 he | 湖 hu | 江 jiang | 风 feng | 雨 yu | 雪 xue | 云 yun
阳 yang | 气 qi | 刮 gua | 晒 shai | 羊 yang | 猪 zhu | 兔 tu | 熊 xiong
猴 hou | 虎 hu | 狮 shi | 象 xiang | 龙 long
数 shu | 语 yu | 文 wen | 英 ying | 科 ke | 技 ji | 术 shu | 艺 yi
历 li | 史 shi | 班 ban | 级 ji | 成 cheng | 绩 ji | 课 ke | 字 zi
词 ci | 句 ju | 笔 bi | 事 shi | 情 qing | 题 ti | 解 jie | 决 jue
主 zhu | 义 yi | 总 zong | 部 bu | 政 zheng | 府 fu | 法 fa | 民 min
队 dui | 员 yuan | 名 ming | 胜 sheng | 输 shu | 赢 ying | 赛 sai
目 mu | 区 qu | 景 jing | 足 zu | 篮 lan | 思 si | 趣 qu | 女 nv | 旅 lv
下 xia | 除 chu | 拜 bai | 滴 di | 神 shen | 永 yong | 板 ban
石 shi | 食 shi | 始 shi | 集 ji | 即 ji | 急 ji | 记 ji | 几 ji | 济 ji
意 yi | 议 yi | 亿 yi | 疑 yi | 移 yi | 力 li | 立 li | 理 li | 利 li
例 li | 系 xi | 细 xi | 育 yu | 遇 yu | 预 yu | 建 jian | 键 jian
减 jian | 渐 jian | 至 zhi | 制 zhi | 治 zhi | 质 zhi | 直 zhi | 值 zhi
植 zhi | 指 zhi | 典 dian | 叔 shu | 熟 shu | 妻 qi | 器 qi | 棋 qi
镜 jing | 精 jing | 原 yuan | 源 yuan | 愿 yuan | 缘 yuan | 起 qi
暗 an | 恩 en | 儿 er | 哦 o | 欧 ou | 昂 ang | 岸 an | 傲 ao | 奥 ao
鹅 e | 鸥 ou
"""


def parse_entries() -> list[tuple[str, str]]:
    rows: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    for chunk in ENTRIES.replace("\n", "|").split("|"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split()
        if len(parts) != 2:
            raise SystemExit(f"bad entry {chunk!r}: want '<char> <syllable>'")
        char, syllable = parts
        if len(char) != 1:
            raise SystemExit(f"bad entry {chunk!r}: char must be one codepoint")
        if split_syllable(syllable) is None:
            raise SystemExit(f"bad entry {chunk!r}: {syllable!r} not decomposable")
        if (char, syllable) in seen:
            print(f"note: dropping duplicate ({char}, {syllable})")
            continue
        seen.add((char, syllable))
        rows.append((char, syllable))
    return rows


def main() -> None:
    rows = parse_entries()
    out = Path(__file__).resolve().parents[1] / "src" / "pinyinlm" / "data" / "lexicon_small.tsv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("# Small bundled lexicon: one row per (character, reading),\n")
        fh.write("# tab-separated, toneless pinyin, preferred reading first.\n")
        for char, syllable in rows:
            fh.write(f"{char}\t{syllable}\n")
    chars = {c for c, _ in rows}
    syllables = {s for _, s in rows}
    print(f"wrote {out}: {len(rows)} rows, {len(chars)} chars, {len(syllables)} syllables")


if __name__ == "__main__":
    main()
