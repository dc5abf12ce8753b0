"""Write the bundled toy BEIR dataset and brute-force check its planted qrels.

Every judged-relevant document must be reachable in the top 10 of an exact
full scan under the default toy configuration (test encoder, dim 64, equal
fusion scales). The script refuses to write anything otherwise.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

from trimodal.documents import Document
from trimodal.encoders import EncoderProfile, TestEncoderProvider
from trimodal.entities import build_entity_catalog
from trimodal.fusion import FusionConfig, TriModalEncoder, build_index, fuse
from trimodal.lexical import build_vocabulary

OUT = Path(__file__).resolve().parents[1] / "src" / "trimodal" / "data" / "toy"

DOCS = [
    ("d01", "Marie Curie and radioactivity",
     "The physicist Marie Curie discovered polonium and radium in Paris. Her work with Pierre Curie earned the Nobel Prize in physics."),
    ("d02", "Radium in medicine",
     "Early cancer clinics in Paris used radium needles. The Radium Institute founded by Marie Curie trained doctors in radiation therapy."),
    ("d03", "Albert Einstein in Bern",
     "While working at the patent office in Bern, the young Albert Einstein published special relativity. The theory links space, time and the speed of light."),
    ("d04", "General relativity",
     "In 1915 Albert Einstein presented general relativity to the Prussian Academy in Berlin. Gravity becomes the curvature of spacetime."),
    ("d05", "Charles Darwin and finches",
     "On the voyage of the Beagle, Charles Darwin collected finches on the Galapagos Islands. Beak shapes suggested natural selection."),
    ("d06", "On the Origin of Species",
     "In 1859 Charles Darwin published his book on evolution in London. Natural selection explains how species adapt over generations."),
    ("d07", "Isaac Newton and gravity",
     "At Cambridge University the mathematician Isaac Newton described universal gravitation. His laws of motion shaped classical mechanics."),
    ("d08", "Ada Lovelace",
     "The mathematician Ada Lovelace wrote the first published algorithm for the Analytical Engine designed by Charles Babbage in London."),
    ("d09", "Alan Turing at Bletchley Park",
     "During the war Alan Turing broke Enigma ciphers at Bletchley Park. His machine model defined what a computer can calculate."),
    ("d10", "Apple and the iPhone",
     "In 2007 the company Apple Inc introduced the iPhone in San Francisco. Steve Jobs presented the touchscreen smartphone on stage."),
    ("d11", "Microsoft Windows",
     "Bill Gates and Paul Allen founded Microsoft in Albuquerque. The Windows operating system later dominated personal computers."),
    ("d12", "Google search",
     "At Stanford University the students Larry Page and Sergey Brin built the PageRank search engine that became Google."),
    ("d13", "Amazon retail",
     "From a garage in Seattle, Jeff Bezos launched Amazon as an online bookstore. The retailer grew into a cloud computing giant."),
    ("d14", "Tesla electric cars",
     "The carmaker Tesla Motors, led by Elon Musk, sells electric vehicles with large battery packs built at the Nevada Gigafactory."),
    ("d15", "SpaceX rockets",
     "The rocket company SpaceX, founded by Elon Musk, lands reusable Falcon boosters after launches from Cape Canaveral."),
    ("d16", "Apollo moon landing",
     "In July 1969 the crew of Apollo 11 landed on the Moon. Neil Armstrong and Buzz Aldrin walked on the lunar surface."),
    ("d17", "Hubble telescope",
     "Launched by NASA aboard the shuttle Discovery, the Hubble Space Telescope photographs distant galaxies above the atmosphere."),
    ("d18", "Mars rovers",
     "The rover Perseverance explores Jezero Crater on Mars. Engineers at the Jet Propulsion Laboratory drive it from California."),
    ("d19", "The Eiffel Tower",
     "The engineer Gustave Eiffel built the iron tower in Paris for the 1889 World Fair. Millions of tourists climb it every year."),
    ("d20", "The Colosseum",
     "The ancient amphitheatre in Rome hosted gladiator games. Emperor Vespasian began the Colosseum, and Titus completed it."),
    ("d21", "Great Wall of China",
     "Built over centuries, the Great Wall stretched across northern China. The Ming Dynasty rebuilt much of the stone fortification."),
    ("d22", "The Amazon rainforest",
     "The Amazon River flows through the rainforest of Brazil and Peru. The basin holds a vast share of the world's species."),
    ("d23", "Mount Everest",
     "The climbers Edmund Hillary and Tenzing Norgay first reached the summit of Mount Everest in the Himalaya in 1953."),
    ("d24", "Wolfgang Amadeus Mozart",
     "The composer Wolfgang Amadeus Mozart wrote operas and symphonies in Vienna. The Magic Flute premiered shortly before his death."),
    ("d25", "Ludwig van Beethoven",
     "Although deaf, the composer Ludwig van Beethoven finished the Ninth Symphony in Vienna. Its finale sets the Ode to Joy."),
    ("d26", "The Beatles",
     "Formed in Liverpool, the band The Beatles recorded Abbey Road in London. John Lennon and Paul McCartney wrote most songs."),
    ("d27", "FIFA World Cup",
     "The national team of Brazil has won the FIFA World Cup five times. Pele scored in the 1958 final in Sweden."),
    ("d28", "Olympic Games",
     "The modern Olympic Games were revived by Pierre de Coubertin and first held in Athens in 1896 with athletes from many nations."),
    ("d29", "Tour de France",
     "Cyclists in the Tour de France race through the Alps and the Pyrenees before the finish on the Champs Elysees in Paris."),
    ("d30", "Wimbledon tennis",
     "The oldest tennis tournament, Wimbledon in London, is played on grass. Roger Federer won the title eight times."),
]

QUERIES = [
    ("q01", "Which elements did Marie Curie discover?", {"d01": 2, "d02": 1}),
    ("q02", "How did Albert Einstein describe gravity and spacetime?", {"d04": 2, "d03": 1}),
    ("q03", "What did the finches of the Galapagos Islands teach Charles Darwin?", {"d05": 2, "d06": 1}),
    ("q04", "Who wrote an algorithm for the Analytical Engine?", {"d08": 2}),
    ("q05", "How did Alan Turing break Enigma?", {"d09": 2}),
    ("q06", "Which companies did Elon Musk found?", {"d14": 1, "d15": 2}),
    ("q07", "When did Apollo 11 land astronauts on the Moon?", {"d16": 2}),
    ("q08", "Why did Gustave Eiffel build a tower in Paris?", {"d19": 2}),
    ("q09", "Which symphony did Ludwig van Beethoven write in Vienna?", {"d25": 2, "d24": 1}),
    ("q10", "How many times has Brazil won the FIFA World Cup?", {"d27": 2}),
    ("q11", "Who first climbed Mount Everest?", {"d23": 2}),
    ("q12", "What search engine did Larry Page build at Stanford University?", {"d12": 2}),
]

PROFILE = EncoderProfile("test-64", 64)


def check() -> list[str]:
    corpus = [Document(i, text, title) for i, title, text in DOCS]
    vocab = build_vocabulary(corpus)
    catalog = build_entity_catalog(corpus)
    enc = TriModalEncoder(TestEncoderProvider(PROFILE), vocab, catalog)
    cfg = FusionConfig()
    index = build_index(corpus, enc, cfg)
    problems = []
    for row, doc in zip(index.matrix, corpus):
        tri = enc.encode([doc.full_text])[0]
        if not all(np.linalg.norm(b) > 0 for b in tri.blocks()):
            problems.append(f"{doc.doc_id}: a modality block is zero")
    for qid, text, rels in QUERIES:
        tri = enc.encode([text])[0]
        if not all(np.linalg.norm(b) > 0 for b in tri.blocks()):
            problems.append(f"{qid}: a modality block is zero")
        q = fuse(tri, cfg, enc.dims)
        scores = index.matrix @ q.values  # full scan
        order = [index.doc_ids[i] for i in np.argsort(-scores, kind="stable")]
        for doc_id in rels:
            rank = order.index(doc_id) + 1
            if rank > 10:
                problems.append(f"{qid}: relevant {doc_id} at rank {rank}")
        print(qid, [(d, order.index(d) + 1) for d in rels], order[:3])
    return problems


def main() -> int:
    problems = check()
    if problems:
        print("\n".join(problems), file=sys.stderr)
        return 1
    OUT.joinpath("qrels").mkdir(parents=True, exist_ok=True)
    with open(OUT / "corpus.jsonl", "w", encoding="utf-8") as fh:
        for i, title, text in DOCS:
            fh.write(json.dumps({"_id": i, "title": title, "text": text}) + "\n")
    with open(OUT / "queries.jsonl", "w", encoding="utf-8") as fh:
        for qid, text, _ in QUERIES:
            fh.write(json.dumps({"_id": qid, "text": text}) + "\n")
    with open(OUT / "qrels" / "test.tsv", "w", encoding="utf-8") as fh:
        fh.write("query-id\tcorpus-id\tscore\n")
        for qid, _, rels in QUERIES:
            for doc_id, grade in sorted(rels.items()):
                fh.write(f"{qid}\t{doc_id}\t{grade}\n")
    print(f"wrote {len(DOCS)} docs, {len(QUERIES)} queries to {OUT}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
