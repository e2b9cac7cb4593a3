"""Prompt text for the three generation conditions.

``REWRITE_TEMPLATE`` is a ``str.format`` template with two fields,
``dict_str`` and ``sentence``; literal braces in the worked examples are
doubled. The baseline and zero-shot system prompts are local wording and
are versioned with ``PROMPTS_VERSION``.
"""

PROMPTS_VERSION = "2024-rewrite-v1"

BASELINE_SYSTEM_PROMPT = (
    "You are a friendly, helpful conversational assistant. "
    "Reply to the user in clear, natural Standard English."
)

ZERO_SHOT_SYSTEM_PROMPT = (
    "You are a friendly, helpful conversational assistant. "
    "Reply to the user in natural Singaporean English, the way a local would speak."
)

REWRITE_TEMPLATE = """\
You are a linguistics expert specialising in the nuances of Singaporean English. \
Rewrite the message in <TARGET> in everyday Singaporean English. \
The messages are currently from a western society and are slightly awkward to hear in Singapore. \
Most Singaporeans speak fluent, standard English, with light Singlish touches here and there. \
Not broken grammar everywhere. \
A dictionary is provided to give you possibilities for words to replace with Singlish variants.

Rules:
- You need not use any of the words from the dictionary, but you may use one of them if it fits the context.
- Absolutely never use any discourse particles such as but not limited to la, lor, leh.
- Replace at most ONE word with a Singlish variant for each sentence even if multiple dictionary matches are present.
- Keep all other parts of the message exactly the same.
- If no suitable match is found, return the original message unchanged.
- You must preserve the message's meaning.
- Return ONLY the rewritten message — do not explain or add anything else.

Examples:

Dictionary: [{{'token': 'behavior', 'word': 'pattern', 'label': 'noun','meaning': 'troublesome or annoying actions'}}, {{'token': 'driving', 'word': 'chiong', 'meaning': 'to charge; to rush forward; to make a dash for'}}]

<TARGET>His behavior is driving everyone mad.</TARGET>
Rewritten: His pattern is driving everyone mad.

Dictionary: [{{'token': 'mind', 'word': 'eye power', 'label': 'noun','meaning': 'just watching and not helping'}}]

<TARGET>If there's anything on your mind, just say it.</TARGET>
Rewritten: If there's anything on your mind, just say it.

Dictionary: [{{'token': 'must', 'word': 'die die', 'label': 'adverb', 'meaning': 'absolutely; no matter what; even at the cost of one's life'}},{{'token': 'amazing','word': 'power','meaning': 'used to express amazement, praise, etc. at something impressive or outstanding'}}]

<TARGET>You must try this dish, it's amazing!</TARGET>
Rewritten: You die die must try this dish, it's amazing!

Dictionary: [{{'token': 'act blur', 'word': 'pretend', 'label': 'verb', 'meaning': 'to feign ignorance; to play dumb'}}, {{'token': 'pretend', 'word': 'act chio', 'meaning': 'to behave in an (often exaggeratedly) charming or vain manner; to act pretty; to pretend as if one is extremely beautiful'}}]

<TARGET> Don't pretend you don't know anything about the situation.</TARGET>
Rewritten: Don't act blur that you don't know anything about the situation.

Please complete the following:

Dictionary: {dict_str}
<TARGET>{sentence}</TARGET>
Rewritten:"""

TARGET_OPEN = "<TARGET>"
TARGET_CLOSE = "</TARGET>"
QUERY_MARKER = "Please complete the following:"
