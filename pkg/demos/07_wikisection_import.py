"""Import a WikiSection-style release file: character-span section
annotations become sentence-level boundary and topic labels."""

import json
import os
import tempfile

from topseg import TopicVocabulary, import_wikisection


def release_entry(doc_id, sections):
    text = ""
    annotations = []
    for label, body in sections:
        begin = len(text)
        text += body + " "
        annotations.append({"type": "SectionAnnotation", "begin": begin,
                            "length": len(body), "sectionHeading": label,
                            "sectionLabel": label})
    return {"id": doc_id, "type": "WikiSection", "title": doc_id,
            "text": text, "annotations": annotations}


payload = [
    release_entry("measles", [
        ("disease.symptom", "Fever rises first. A rash follows within days."),
        ("disease.cause", "The virus spreads by droplets."),
        ("disease.treatment", "Care is supportive. Fluids are key."),
    ]),
    release_entry("tetanus", [
        ("disease.cause", "Spores enter through wounds."),
        ("disease.symptom", "Muscles stiffen. Spasms spread from the jaw."),
    ]),
    # Single-segment documents carry no boundary to learn and are skipped.
    release_entry("stub", [("disease.cause", "One lonely section.")]),
]

with tempfile.TemporaryDirectory() as tmp:
    path = os.path.join(tmp, "release.json")
    with open(path, "w") as fh:
        json.dump(payload, fh)

    docs, vocab, skipped = import_wikisection(path)
    print("imported:", [d.id for d in docs], "| skipped:", skipped)
    print("labels:  ", vocab.labels)

    doc = docs[0]
    for sentence, boundary, topic in zip(doc.sentences, doc.boundaries,
                                         doc.topics):
        print(f"  [{boundary}] {vocab.labels[topic]:18s} {sentence}")

    # A fixed vocabulary maps unseen labels to the reserved OOV id.
    fixed = TopicVocabulary.build(["disease.cause"])
    docs2, _, _ = import_wikisection(path, fixed)
    print("with fixed vocab:", docs2[0].topics, "(OOV id =", fixed.oov_id, ")")
