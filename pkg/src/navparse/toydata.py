"""Two small restaurant-style sites for demos, smoke tests and benchmarks.

toy_site() declares "tablehub": two pages, four actions, six parameters,
forty-plus command templates and a paraphrase table rich enough to train
every component end to end at desk scale. renamed_toy_site() declares
"seatfinder", a second site in the same domain whose actions and
parameters are renamed but semantically overlapping (the value domains,
being UI artifacts like reservation times, are shared). Training on the
first and testing on the second exercises transfer to an unseen site.
"""

from __future__ import annotations

from .dataset import CommandTemplate, ParaphraseTable
from .schema import ActionSchema, ParameterSpec, SiteSchema, validate_site_schema

PEOPLE_VALUES = ("1 person", "2 people", "3 people", "4 people",
                 "5 people", "6 people")
TIME_VALUES = ("17:00", "17:30", "18:00", "18:30", "19:00", "19:30",
               "20:00", "20:30")
PRICE_VALUES = ("cheap", "moderate", "expensive", "any price")
RATING_VALUES = ("3 stars", "4 stars", "5 stars")
ORDER_VALUES = ("price low to high", "price high to low", "best rated",
                "distance")

PEOPLE_PARAPHRASES = {
    "1 person": ["1 person", "one person", "just me", "myself", "a single seat"],
    "2 people": ["2 people", "two people", "2 of us", "for two",
                 "me and my friend", "a couple of us", "party of 2"],
    "3 people": ["3 people", "three people", "3 of us", "party of 3",
                 "me and two friends"],
    "4 people": ["4 people", "four people", "4 of us", "party of 4",
                 "a group of 4"],
    "5 people": ["5 people", "five people", "5 of us", "party of 5"],
    "6 people": ["6 people", "six people", "6 of us", "party of 6",
                 "a group of six"],
}

TIME_PARAPHRASES = {
    "17:00": ["17:00", "5 pm", "5:00 pm", "five in the evening"],
    "17:30": ["17:30", "5:30 pm", "half past five"],
    "18:00": ["18:00", "6 pm", "6:00 pm", "six in the evening"],
    "18:30": ["18:30", "6:30 pm", "half past six"],
    "19:00": ["19:00", "7 pm", "7:00 pm", "seven in the evening"],
    "19:30": ["19:30", "7:30 pm", "half past seven"],
    "20:00": ["20:00", "8 pm", "8:00 pm", "eight in the evening"],
    "20:30": ["20:30", "8:30 pm", "half past eight"],
}

PRICE_PARAPHRASES = {
    "cheap": ["cheap", "budget", "inexpensive", "low cost", "low price"],
    "moderate": ["moderate", "mid price", "reasonably priced"],
    "expensive": ["expensive", "high end", "upscale", "high price"],
    "any price": ["any price", "all prices", "whatever price"],
}

RATING_PARAPHRASES = {
    "3 stars": ["3 stars", "three stars", "3 star"],
    "4 stars": ["4 stars", "four stars", "4 star"],
    "5 stars": ["5 stars", "five stars", "5 star", "top stars"],
}

ORDER_PARAPHRASES = {
    "price low to high": ["price low to high", "cheapest first",
                          "lowest price first"],
    "price high to low": ["price high to low", "most expensive first",
                          "highest price first"],
    "best rated": ["best rated", "top rated", "highest rated",
                   "best ranking"],
    "distance": ["distance", "closest first", "nearest first"],
}

CUISINE_VALUES = ["italian", "sushi", "mexican", "thai", "indian", "vegan",
                  "chinese", "korean", "pizza", "seafood", "steak", "ramen",
                  "tapas", "burgers", "greek", "street food", "fast food",
                  "comfort food"]

_FIND_TEMPLATES = [
    "find a table for [people]",
    "book a table for [people] at [time]",
    "reserve a table for [people] for [cuisine] at [time]",
    "get me a [cuisine] table at [time]",
    "find [cuisine] for [people]",
    "book a table at [time]",
    "find a spot for [people]",
    "reserve for [people] at [time]",
    "table for [people] please",
    "find me a [cuisine] restaurant",
    "book [cuisine] for [people] at [time]",
    "i want a table for [people] around [time]",
]

_SIGNIN_TEMPLATES = [
    "sign in please",
    "log me in",
    "sign into my account",
    "log in to my account",
    "i want to sign in",
    "access my account",
]

_FILTER_TEMPLATES = [
    "filter by [price]",
    "only show [price] places",
    "show me [rating] restaurants",
    "filter results to [rating]",
    "show [price] options with [rating]",
    "narrow it down to [price]",
    "only [rating] spots",
    "filter the results by [price] and [rating]",
    "restrict to [price]",
    "keep places rated [rating]",
    "i want [price] restaurants only",
    "limit the list to [rating]",
]

_SORT_TEMPLATES = [
    "sort by [order]",
    "order the results by [order]",
    "sort the list by [order]",
    "arrange results by [order]",
    "rank places by [order]",
    "sort them by [order]",
    "show results ordered by [order]",
    "reorder by [order]",
    "sort everything by [order]",
    "put them in [order] order",
]


def toy_site() -> tuple[SiteSchema, list[CommandTemplate], ParaphraseTable]:
    """The training site: schema, templates and paraphrases."""
    schema = SiteSchema(
        site_id="tablehub",
        domain_tag="restaurants",
        pages={
            "home": (
                ActionSchema(
                    name="find a table", page="home",
                    parameters=(
                        ParameterSpec("people", "closed", PEOPLE_VALUES),
                        ParameterSpec("time", "closed", TIME_VALUES),
                        ParameterSpec("cuisine", "open"),
                    )),
                ActionSchema(name="sign in", page="home"),
            ),
            "results": (
                ActionSchema(
                    name="filter results", page="results",
                    parameters=(
                        ParameterSpec("price", "closed", PRICE_VALUES),
                        ParameterSpec("rating", "closed", RATING_VALUES),
                    )),
                ActionSchema(
                    name="sort results", page="results",
                    parameters=(
                        ParameterSpec("order", "closed", ORDER_VALUES),
                    )),
            ),
        })
    validate_site_schema(schema)
    templates = (
        [CommandTemplate("home", "find a table", text)
         for text in _FIND_TEMPLATES]
        + [CommandTemplate("home", "sign in", text)
           for text in _SIGNIN_TEMPLATES]
        + [CommandTemplate("results", "filter results", text)
           for text in _FILTER_TEMPLATES]
        + [CommandTemplate("results", "sort results", text)
           for text in _SORT_TEMPLATES]
    )
    paraphrases = ParaphraseTable(
        closed={
            "people": {k: list(v) for k, v in PEOPLE_PARAPHRASES.items()},
            "time": {k: list(v) for k, v in TIME_PARAPHRASES.items()},
            "price": {k: list(v) for k, v in PRICE_PARAPHRASES.items()},
            "rating": {k: list(v) for k, v in RATING_PARAPHRASES.items()},
            "order": {k: list(v) for k, v in ORDER_PARAPHRASES.items()},
        },
        open={"cuisine": list(CUISINE_VALUES)},
    )
    return schema, templates, paraphrases


_RENAMED_FIND_TEMPLATES = [
    "book a table for [party]",
    "reserve a table for [party] at [reservation time]",
    "get a [food] table at [reservation time]",
    "find a table for [party] at [reservation time]",
    "book [food] for [party]",
    "i need a table for [party] around [reservation time]",
]

_RENAMED_LOGIN_TEMPLATES = [
    "log in please",
    "sign me in",
    "log into my account",
]

_RENAMED_NARROW_TEMPLATES = [
    "filter by [cost]",
    "only show [cost] places",
    "show me [stars] restaurants",
    "keep places rated [stars]",
    "restrict the list to [cost]",
    "show [cost] options with [stars]",
]

_RENAMED_RANK_TEMPLATES = [
    "sort by [ranking]",
    "order the list by [ranking]",
    "arrange everything by [ranking]",
    "rank the places by [ranking]",
]


def renamed_toy_site() -> tuple[SiteSchema, list[CommandTemplate],
                                ParaphraseTable]:
    """A second in-domain site with renamed actions and parameters.

    Value domains are identical to toy_site() (times and party sizes are
    UI artifacts that genuinely repeat across sites), while the action and
    parameter labels change the way they do between real sites: different
    words with partial overlap ("find a table" vs "book a table",
    "filter results" vs "narrow results"). Training on toy_site() and
    testing here exercises transfer to an unseen schema.
    """
    schema = SiteSchema(
        site_id="seatfinder",
        domain_tag="restaurants",
        pages={
            "home": (
                ActionSchema(
                    name="book a table", page="home",
                    parameters=(
                        ParameterSpec("party", "closed", PEOPLE_VALUES),
                        ParameterSpec("reservation time", "closed",
                                      TIME_VALUES),
                        ParameterSpec("food", "open"),
                    )),
                ActionSchema(name="log in", page="home"),
            ),
            "results": (
                ActionSchema(
                    name="narrow results", page="results",
                    parameters=(
                        ParameterSpec("cost", "closed", PRICE_VALUES),
                        ParameterSpec("stars", "closed", RATING_VALUES),
                    )),
                ActionSchema(
                    name="rank list", page="results",
                    parameters=(
                        ParameterSpec("ranking", "closed", ORDER_VALUES),
                    )),
            ),
        })
    validate_site_schema(schema)
    templates = (
        [CommandTemplate("home", "book a table", text)
         for text in _RENAMED_FIND_TEMPLATES]
        + [CommandTemplate("home", "log in", text)
           for text in _RENAMED_LOGIN_TEMPLATES]
        + [CommandTemplate("results", "narrow results", text)
           for text in _RENAMED_NARROW_TEMPLATES]
        + [CommandTemplate("results", "rank list", text)
           for text in _RENAMED_RANK_TEMPLATES]
    )
    paraphrases = ParaphraseTable(
        closed={
            "party": {k: list(v) for k, v in PEOPLE_PARAPHRASES.items()},
            "reservation time": {k: list(v)
                                 for k, v in TIME_PARAPHRASES.items()},
            "cost": {k: list(v) for k, v in PRICE_PARAPHRASES.items()},
            "stars": {k: list(v) for k, v in RATING_PARAPHRASES.items()},
            "ranking": {k: list(v) for k, v in ORDER_PARAPHRASES.items()},
        },
        open={"food": list(CUISINE_VALUES)},
    )
    return schema, templates, paraphrases
