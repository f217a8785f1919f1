"""Regenerate src/factorevo/data/stories.txt, the bundled children's-story corpus.

The corpus is composed from hand-written sentence templates with a fixed
seed, so rerunning this script reproduces the shipped file byte for byte.
"""

from pathlib import Path

from factorevo.rng import NoiseStream

NAMES = ["Lily", "Tom", "Mia", "Ben", "Sue", "Max", "Anna", "Sam", "Lucy", "Jack", "Zoe", "Tim", "Ella", "Leo"]
ANIMALS = ["cat", "dog", "bird", "bunny", "frog", "duck", "puppy", "kitten", "fox", "bear", "mouse", "owl"]
THINGS = ["ball", "kite", "red hat", "toy car", "blue box", "big drum", "shiny stone", "little boat",
          "book", "cake", "flower", "teddy bear", "spoon", "balloon", "needle", "blanket"]
PLACES = ["the park", "the garden", "the forest", "the beach", "the big hill", "the pond", "her room",
          "the yard", "the farm", "the old tree", "the river", "the school"]
ADJ = ["happy", "sad", "scared", "brave", "kind", "curious", "tired", "excited", "proud", "shy"]
WEATHER = ["sunny", "rainy", "windy", "cold", "warm", "cloudy"]
HELPERS = ["mom", "dad", "grandma", "grandpa", "friend", "teacher", "big sister", "big brother"]

OPENINGS = [
    "Once upon a time, there was a little {who} named {name}.",
    "One day, a {adj} {who} named {name} went to {place}.",
    "{name} was a {adj} {who} who lived near {place}.",
    "It was a {weather} day. {name} wanted to play outside.",
    "There once was a {who} called {name}. {name} loved {thing_pl}.",
]
FINDS = [
    "{name} found a {thing} in {place}.",
    "At {place}, {name} saw a {thing} under a leaf.",
    "{name} looked around and saw a {animal} with a {thing}.",
    "Near {place}, there was a {thing} that nobody wanted.",
]
PROBLEMS = [
    "But the {thing} was stuck high in a tree.",
    "The {animal} was {adj2} because it could not find its home.",
    "Then the {thing} fell into the water and began to float away.",
    "Suddenly, the wind blew hard and the {thing} flew away.",
    "{name} wanted to share the {thing}, but {pronoun} did not know how.",
    "The {thing} was broken, and {name} felt {adj2}.",
]
TRIES = [
    "{name} tried to reach it, but {pronoun} was too small.",
    "{name} thought and thought. Then {pronoun} had an idea.",
    "{name} asked the {animal}, \"Can you help me?\" The {animal} said, \"Yes, I can help you.\"",
    "{name} ran to {possessive} {helper} and said, \"Please help me!\"",
    "{name} did not give up. {pronoun_cap} tried again and again.",
]
SOLUTIONS = [
    "Together they worked hard and got the {thing} back.",
    "The {helper} smiled and fixed the {thing} with a little glue.",
    "The {animal} climbed up and pushed the {thing} down.",
    "They walked along {place} until they found the way home.",
    "{name} used a long stick, and soon the {thing} was safe.",
]
ENDINGS = [
    "{name} said thank you, and they played together all day.",
    "From that day on, {name} and the {animal} were best friends.",
    "{name} learned that it is good to share and to be kind.",
    "They both felt {adj3} because they had worked together.",
    "At night, {name} went to bed with a big smile.",
    "{name} hugged {possessive} {helper}. It was the best day ever.",
]
DIALOG = [
    "\"Look at this!\" said {name}. \"It is so {adj3}!\"",
    "\"Can I play too?\" asked the {animal}.",
    "\"Do not be {adj2},\" said the {helper}. \"We can fix it.\"",
    "\"I like your {thing},\" said {name}.",
]


class Picker:
    def __init__(self, seed):
        self.s = NoiseStream(seed)

    def __call__(self, items):
        return items[self.s.randbelow(len(items))]


def story(pick: Picker, name: str) -> str:
    she = name in {"Lily", "Mia", "Sue", "Anna", "Lucy", "Zoe", "Ella"}
    ctx = {
        "name": name,
        "who": "girl" if she else "boy",
        "pronoun": "she" if she else "he",
        "pronoun_cap": "She" if she else "He",
        "possessive": "her" if she else "his",
        "animal": pick(ANIMALS),
        "thing": pick(THINGS),
        "place": pick(PLACES),
        "adj": pick(ADJ),
        "adj2": pick(["sad", "scared", "worried", "upset"]),
        "adj3": pick(["happy", "glad", "proud", "nice", "pretty"]),
        "weather": pick(WEATHER),
        "helper": pick(HELPERS),
    }
    ctx["thing_pl"] = ctx["thing"] + "s"
    parts = [pick(OPENINGS), pick(FINDS)]
    if pick([0, 1]):
        parts.append(pick(DIALOG))
    parts += [pick(PROBLEMS), pick(TRIES)]
    if pick([0, 1, 2]) == 0:
        parts += [pick(PROBLEMS), pick(TRIES)]
    parts += [pick(SOLUTIONS)]
    if pick([0, 1]):
        parts.append(pick(DIALOG))
    parts.append(pick(ENDINGS))
    text = " ".join(p.format(**ctx) for p in parts)
    return text.replace("her room", f"{ctx['possessive']} room")


def main(n_stories: int = 80, seed: int = 2048) -> None:
    pick = Picker(seed)
    stories = []
    for _ in range(n_stories):
        # one or two episodes per story keeps lengths near TinyStories
        name = pick(NAMES)
        stories.append(" ".join(story(pick, name) for _ in range(1 + pick([0, 1, 1]))))
    text = "".join(s + "\n<|endoftext|>\n" for s in stories)
    out = Path(__file__).resolve().parents[1] / "src" / "factorevo" / "data" / "stories.txt"
    out.write_text(text, encoding="utf-8")
    print(f"wrote {len(text)} bytes, {n_stories} stories -> {out}")


if __name__ == "__main__":
    main()
