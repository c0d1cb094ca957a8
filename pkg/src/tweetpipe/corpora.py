"""Static text corpora for the deterministic tweet generator.

Everything here is plain data. Keeping it out of the generator module
makes the generator logic readable and lets tests import the pools to
compute expected distributions.
"""

from __future__ import annotations

FIRST_NAMES = (
    "Alice", "Bruno", "Carmen", "Deepak", "Elena", "Farid", "Grace", "Hiro",
    "Ines", "Jonas", "Kavya", "Liam", "Mariam", "Nadia", "Omar", "Priya",
    "Quentin", "Rosa", "Sven", "Tomas", "Uma", "Viktor", "Wanda", "Xiu",
    "Yusuf", "Zaira",
)

LAST_NAMES = (
    "Alvarez", "Bauer", "Chen", "Dubois", "Eriksen", "Fischer", "Garcia",
    "Haddad", "Ivanov", "Jensen", "Kowalski", "Lindgren", "Moreau", "Nakamura",
    "Okafor", "Pereira", "Quinn", "Rossi", "Santos", "Tanaka", "Ueda",
    "Varga", "Weber", "Xu", "Yilmaz", "Zhang",
)

USERNAME_STEMS = (
    "pixel", "night", "cloud", "river", "ember", "lunar", "quartz", "velvet",
    "static", "orbit", "fable", "cobalt", "willow", "drift", "saffron",
    "juniper", "crimson", "atlas", "meadow", "harbor",
)

# Location strings as users actually write them: real places in several
# spellings, places with decoration, and junk the gazetteer must reject.
LOCATIONS = (
    "Paris, France",
    "NYC",
    "London",
    "Berlin, Germany",
    "Tokyo",
    "Mumbai, India",
    "Bombay",
    "Sao Paulo, Brazil",
    "Lagos, Nigeria",
    "Toronto, Canada",
    "Sydney",
    "Madrid",
    "Cairo, Egypt",
    "Moscow",
    "Istanbul",
    "Mexico City",
    "Jakarta, Indonesia",
    "Seoul, South Korea",
    "Nairobi",
    "Buenos Aires",
    "Lima, Peru",
    "Bangkok",
    "Amsterdam, Netherlands",
    "Stockholm",
    "Warsaw, Poland",
    "Vienna",
    "Dublin, Ireland",
    "Lisbon",
    "Prague",
    "Athens, Greece",
    "Helsinki",
    "Oslo, Norway",
    "Copenhagen",
    "Zurich",
    "Brussels, Belgium",
    "somewhere on earth",
    "the moon",
    "in my head",
    "wonderland",
    "127.0.0.1",
    "between gigs",
    "everywhere and nowhere",
    "planet mars",
    "your imagination",
    "behind you",
)

# Weighted toward en to mirror a public stream; "und" marks text the
# source could not classify.
LANGS = (
    "en", "en", "en", "en", "es", "es", "pt", "fr", "de", "ja", "in", "tr",
    "ar", "ko", "it", "nl", "pl", "ru", "hi", "th",
)

# Body vocabulary. Includes the category keywords the gateway's default
# rules match so generated traffic exercises every category.
WORDS = (
    "just", "really", "today", "never", "always", "maybe", "honestly",
    "finally", "again", "still", "already", "actually", "probably",
    "morning", "tonight", "weekend", "coffee", "music", "game", "match",
    "team", "movie", "series", "book", "school", "work", "meeting",
    "deadline", "project", "update", "release", "launch", "sale", "discount",
    "shopping", "checkout", "order", "delivery", "brand", "store", "price",
    "deal", "recipe", "dinner", "lunch", "breakfast", "restaurant", "pizza",
    "sushi", "vegan", "snack", "baking", "flight", "hotel", "airport",
    "vacation", "beach", "trip", "passport", "luggage", "tour", "museum",
    "friends", "family", "community", "neighborhood", "party", "wedding",
    "birthday", "graduation", "election", "protest", "festival", "concert",
    "rain", "sunny", "snow", "traffic", "train", "bus", "bike", "running",
    "gym", "yoga", "sleep", "dream", "happy", "tired", "excited", "bored",
)

HASHTAG_WORDS = (
    "mondaymotivation", "breaking", "nowplaying", "throwback", "travel",
    "foodie", "deals", "fitness", "news", "ootd", "gamenight", "weekendvibes",
)
