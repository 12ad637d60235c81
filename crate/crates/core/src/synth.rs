//! Synthetic graphs and dialogue corpora for tests and demos.
//!
//! The world has books, movies, songs and people, each with its own relation
//! set and an `instance_of` edge to a type node. Every generated dialogue
//! mentions two or three items of different types. The answer closes with a
//! sentence that names the gold item next to a word for its type ("book",
//! "movie", "song", "fan") and a cue for the gold relation, and the gold
//! follow-up uses one unambiguous cue word per relation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::DialogueExample;
use crate::kg::KnowledgeGraph;
use crate::rng::substream;
use crate::Result;

const ADJECTIVES: &[&str] = &[
    "Silent", "Hidden", "Broken", "Golden", "Last", "Crimson", "Distant", "Frozen", "Wandering", "Secret",
    "Burning", "Quiet",
];
const BOOK_NOUNS: &[&str] = &[
    "River", "Garden", "Empire", "Letter", "Island", "Promise", "Harbor", "Forest", "Lantern", "Mirror",
    "Voyage", "Orchard",
];
const MOVIE_HEADS: &[&str] = &["Night", "Storm", "Edge", "Return", "Rise", "Fall", "Shadow", "Heart", "Dawn", "Echo"];
const MOVIE_TAILS: &[&str] = &["Titans", "Wolves", "Valley", "North", "Sea", "Machine", "Kings", "Giants"];
const SONG_HEADS: &[&str] = &["Dancing", "Falling", "Running", "Dreaming", "Chasing", "Waiting", "Singing", "Drifting"];
const SONG_TAILS: &[&str] = &["Stars", "Rain", "Lights", "Hearts", "Waves", "Skies", "Roads"];
const FIRST_NAMES: &[&str] = &["Alice", "Marco", "Priya", "Kenji", "Sofia", "Omar", "Lena", "David", "Chloe", "Ravi"];
const LAST_NAMES: &[&str] = &["Harper", "Moreno", "Okafor", "Lindqvist", "Tanaka", "Duval", "Brennan", "Castillo"];
const GENRES: &[&str] = &["Mystery", "Comedy", "Drama", "Thriller", "Romance", "Fantasy"];
const SUBJECTS: &[&str] = &["Friendship", "War", "Family", "Revenge", "Survival", "Ambition"];
const PLACES: &[&str] = &["Lisbon", "Oslo", "Kyoto", "Nairobi", "Toronto", "Lima"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Kind {
    Book,
    Movie,
    Song,
    Person,
}

impl Kind {
    const ALL: [Kind; 4] = [Kind::Book, Kind::Movie, Kind::Song, Kind::Person];

    fn relations(self) -> &'static [&'static str] {
        match self {
            Kind::Book => &["written_by", "release_year", "genre", "subject"],
            Kind::Movie => &["directed_by", "starred_actors", "release_year", "genre"],
            Kind::Song => &["performed_by", "release_year", "genre"],
            Kind::Person => &["born_in"],
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            Kind::Book => "book",
            Kind::Movie => "movie",
            Kind::Song => "song",
            Kind::Person => "person",
        }
    }

    /// Closing sentence naming the gold item with a word for its type.
    fn closing(self, name: &str) -> String {
        match self {
            Kind::Book => format!("My favourite book is {name}."),
            Kind::Movie => format!("My favourite movie is {name}."),
            Kind::Song => format!("My favourite song is {name}."),
            Kind::Person => format!("I am a big fan of {name}."),
        }
    }
}

/// Question frames for gold follow-ups; each relation has its own cue word.
pub fn followup_frames(relation: &str) -> &'static [&'static str] {
    match relation {
        "written_by" => &["Who wrote {e}?", "Do you know who wrote {e}?"],
        "release_year" => &["When was {e} released?", "What year was {e} released?"],
        "directed_by" => &["Who directed {e}?", "Do you know who directed {e}?"],
        "starred_actors" => &["Who starred in {e}?", "Which actors starred in {e}?"],
        "performed_by" => &["Who performed {e}?", "Do you know who performed {e}?"],
        "born_in" => &["Where was {e} born?", "Do you know where {e} was born?"],
        "genre" => &["What genre is {e}?", "Which genre does {e} belong to?"],
        "subject" => &["What is the subject of {e}?", "Which subject does {e} cover?"],
        _ => &["What is the {r} of {e}?"],
    }
}

fn relation_cue(relation: &str) -> &'static str {
    match relation {
        "written_by" => "I wonder who wrote it.",
        "release_year" => "I wonder when it was released.",
        "directed_by" => "I wonder who directed it.",
        "starred_actors" => "I wonder who starred in it.",
        "performed_by" => "I wonder who performed it.",
        "born_in" => "I wonder where they were born.",
        "genre" => "I wonder about its genre.",
        "subject" => "I wonder about its subject.",
        _ => "I wonder about it.",
    }
}

/// A generated graph together with the text of its source files.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub graph: KnowledgeGraph,
    pub triples_tsv: String,
    pub surface_tsv: String,
    items: BTreeMap<Kind, Vec<(String, String)>>,
}

impl SyntheticWorld {
    pub fn items(&self, kind: Kind) -> &[(String, String)] {
        &self.items[&kind]
    }

    fn name_of(&self, id: &str) -> &str {
        &self.graph.entity(id).expect("generated id").canonical_name
    }
}

fn pairs(a: &[&str], b: &[&str], join: impl Fn(&str, &str) -> String) -> Vec<String> {
    a.iter().flat_map(|x| b.iter().map(|y| join(x, y)).collect::<Vec<_>>()).collect()
}

fn slug(name: &str) -> String {
    crate::text::tokenize(name).join("_")
}

/// Builds a world with the given number of items per kind (each at most the
/// size of its name pool).
pub fn world(seed: u64, per_kind: usize) -> Result<SyntheticWorld> {
    let mut rng = substream(seed, "synth-world");
    let mut triples = String::new();
    let mut surface = String::new();
    let mut items: BTreeMap<Kind, Vec<(String, String)>> = BTreeMap::new();

    let mut names = BTreeMap::new();
    names.insert(Kind::Book, pairs(ADJECTIVES, BOOK_NOUNS, |a, b| format!("The {a} {b}")));
    names.insert(Kind::Movie, pairs(MOVIE_HEADS, MOVIE_TAILS, |a, b| format!("{a} of the {b}")));
    names.insert(Kind::Song, pairs(SONG_HEADS, SONG_TAILS, |a, b| format!("{a} {b}")));
    names.insert(Kind::Person, pairs(FIRST_NAMES, LAST_NAMES, |a, b| format!("{a} {b}")));

    let declare = |surface: &mut String, id: &str, name: &str| {
        surface.push_str(&format!("{id}\t{name}\n"));
    };
    for (prefix, pool) in [("genre", GENRES), ("subject", SUBJECTS), ("place", PLACES)] {
        for n in pool {
            let id = format!("{prefix}_{}", slug(n));
            declare(&mut surface, &id, n);
            triples.push_str(&format!("{id}\tinstance_of\ttype_{prefix}\n"));
        }
    }
    for kind in Kind::ALL {
        let pool = names.get_mut(&kind).expect("pool");
        pool.shuffle(&mut rng);
        let chosen: Vec<(String, String)> = pool
            .iter()
            .take(per_kind)
            .map(|n| (format!("{}_{}", kind.prefix(), slug(n)), n.clone()))
            .collect();
        for (id, name) in &chosen {
            declare(&mut surface, id, name);
            triples.push_str(&format!("{id}\tinstance_of\ttype_{}\n", kind.prefix()));
        }
        items.insert(kind, chosen);
    }
    let people: Vec<String> = items[&Kind::Person].iter().map(|(id, _)| id.clone()).collect();
    let pick = |rng: &mut crate::rng::StageRng, pool: &[&str], prefix: &str| {
        format!("{prefix}_{}", slug(pool[rng.gen_range(0..pool.len())]))
    };
    for kind in Kind::ALL {
        for (id, _) in items[&kind].clone() {
            for rel in kind.relations() {
                let tail = match *rel {
                    "written_by" | "directed_by" | "starred_actors" | "performed_by" => {
                        people[rng.gen_range(0..people.len())].clone()
                    }
                    "release_year" => format!("{}", rng.gen_range(1950..2021)),
                    "genre" => pick(&mut rng, GENRES, "genre"),
                    "subject" => pick(&mut rng, SUBJECTS, "subject"),
                    "born_in" => pick(&mut rng, PLACES, "place"),
                    _ => unreachable!("relation table"),
                };
                triples.push_str(&format!("{id}\t{rel}\t{tail}\n"));
            }
        }
    }
    let graph = KnowledgeGraph::from_sources(&triples, &surface)?;
    Ok(SyntheticWorld { graph, triples_tsv: triples, surface_tsv: surface, items })
}

const OPENERS: &[&str] = &["Do you know {e}?", "Have you heard of {e}?", "What do you think of {e}?"];
const ASIDES: &[&str] = &["{e} came up in a conversation last week.", "It reminds me of {e}.", "Someone mentioned {e} too."];

/// Generates `n` dialogues over `world`. Ids are `syn-00000`, `syn-00001`, ...
pub fn corpus(world: &SyntheticWorld, n: usize, seed: u64) -> Vec<DialogueExample> {
    let mut rng = substream(seed, "synth-corpus");
    (0..n)
        .map(|i| {
            let mut kinds = Kind::ALL.to_vec();
            kinds.shuffle(&mut rng);
            // 2 or 3 mentions, 2.45 on average
            let count = if rng.gen_bool(0.45) { 3 } else { 2 };
            let mentioned: Vec<(Kind, String)> = kinds[..count]
                .iter()
                .map(|&k| {
                    let pool = world.items(k);
                    (k, pool[rng.gen_range(0..pool.len())].0.clone())
                })
                .collect();
            let gold_pos = rng.gen_range(0..count);
            let (gold_kind, gold) = mentioned[gold_pos].clone();
            let rels = gold_kind.relations();
            let relation = rels[rng.gen_range(0..rels.len())];

            let opener_pos = rng.gen_range(0..count);
            let opener = OPENERS[rng.gen_range(0..OPENERS.len())];
            let question = opener.replace("{e}", world.name_of(&mentioned[opener_pos].1));
            let mut answer_parts: Vec<String> = Vec::new();
            for (j, (_, id)) in mentioned.iter().enumerate() {
                if j != gold_pos && j != opener_pos {
                    let aside = ASIDES[rng.gen_range(0..ASIDES.len())];
                    answer_parts.push(aside.replace("{e}", world.name_of(id)));
                }
            }
            if answer_parts.is_empty() {
                answer_parts.push("Yes, I know it well.".to_string());
            }
            answer_parts.push(relation_cue(relation).to_string());
            answer_parts.push(gold_kind.closing(world.name_of(&gold)));

            let frames = followup_frames(relation);
            let frame = frames[rng.gen_range(0..frames.len())];
            let followup = frame.replace("{e}", world.name_of(&gold)).replace("{r}", &relation.replace('_', " "));
            DialogueExample {
                id: format!("syn-{i:05}"),
                question,
                answer: answer_parts.join(" "),
                mentions: mentioned.into_iter().map(|(_, id)| id).collect(),
                gold_entity: gold,
                gold_relation: relation.to_string(),
                followup,
            }
        })
        .collect()
}

/// A `rows x cols` grid of entities joined by `right`, `down` and `diagonal`
/// edges. Every relation is a consistent translation, so translational
/// embeddings can fit it and generalize to held-out edges.
pub fn lattice(rows: usize, cols: usize) -> Result<KnowledgeGraph> {
    let id = |r: usize, c: usize| format!("n{r}_{c}");
    let mut triples = String::new();
    let mut surface = String::new();
    for r in 0..rows {
        for c in 0..cols {
            surface.push_str(&format!("{}\tnode {r} {c}\n", id(r, c)));
            if c + 1 < cols {
                triples.push_str(&format!("{}\tright\t{}\n", id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                triples.push_str(&format!("{}\tdown\t{}\n", id(r, c), id(r + 1, c)));
            }
            if r + 1 < rows && c + 1 < cols {
                triples.push_str(&format!("{}\tdiagonal\t{}\n", id(r, c), id(r + 1, c + 1)));
            }
        }
    }
    KnowledgeGraph::from_sources(&triples, &surface)
}

/// A directed chain `c0 -> c1 -> ... -> c{n-1}` under a single relation.
pub fn chain(n: usize) -> Result<KnowledgeGraph> {
    let mut triples = String::new();
    let mut surface = String::new();
    for i in 0..n {
        surface.push_str(&format!("c{i}\tchain node {i}\n"));
        if i + 1 < n {
            triples.push_str(&format!("c{i}\tnext\tc{}\n", i + 1));
        }
    }
    KnowledgeGraph::from_sources(&triples, &surface)
}

/// Two hand-written dialogues about a book and a song, with a small graph around them.
pub fn worked_example() -> Result<(SyntheticWorld, Vec<DialogueExample>)> {
    let triples = "\
when_im_gone\tinstance_of\ttype_book
when_im_gone\trelease_year\t2016
when_im_gone\tgenre\tgenre_drama
when_im_gone\tsimilar_to\tthe_runaway_jury_book
the_runaway_jury_book\tinstance_of\ttype_book
the_runaway_jury_book\twritten_by\tjohn_grisham
the_runaway_jury_book\tgenre\tgenre_suspense
the_runaway_jury_book\tsubject\tsubject_law
the_runaway_jury_book\trelease_year\t1996
runaway_jury_film\tinstance_of\ttype_movie
runaway_jury_film\tdirected_by\tgary_fleder
runaway_jury_film\tbased_on\tthe_runaway_jury_book
john_grisham\tinstance_of\ttype_person
gary_fleder\tinstance_of\ttype_person
";
    let surface = "\
when_im_gone\tWhen I'm Gone
the_runaway_jury_book\tThe Runaway Jury
runaway_jury_film\tRunaway Jury
john_grisham\tJohn Grisham\tGrisham
gary_fleder\tGary Fleder
genre_drama\tDrama
genre_suspense\tSuspense
subject_law\tLaw
";
    let graph = KnowledgeGraph::from_sources(triples, surface)?;
    let examples = alloc::vec![
        DialogueExample {
            id: "t5-1".into(),
            question: "Do you know When I'm Gone?".into(),
            answer: "It was, the same year When I'm Gone was released, which is another similar book.".into(),
            mentions: alloc::vec!["when_im_gone".into()],
            gold_entity: "when_im_gone".into(),
            gold_relation: "release_year".into(),
            followup: "When was \"When I'm gone\" released?".into(),
        },
        DialogueExample {
            id: "t5-2".into(),
            question: "Do you know The Runaway Jury?".into(),
            answer: "The Runaway Jury is written by John Grisham, with a genre of Suspense.".into(),
            mentions: alloc::vec!["the_runaway_jury_book".into(), "john_grisham".into()],
            gold_entity: "the_runaway_jury_book".into(),
            gold_relation: "subject".into(),
            followup: "What is the subject of The Runaway Jury?".into(),
        },
    ];
    let world = SyntheticWorld {
        graph,
        triples_tsv: triples.to_string(),
        surface_tsv: surface.to_string(),
        items: BTreeMap::new(),
    };
    Ok((world, examples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_corpus, corpus_stats, SplitRatios};

    #[test]
    fn generated_corpus_is_valid_against_its_graph() {
        let w = world(1, 12).unwrap();
        let exs = corpus(&w, 200, 2);
        let loaded = build_corpus(exs, &w.graph, &SplitRatios::default()).unwrap();
        assert!(loaded.dropped.is_empty(), "{:?}", loaded.dropped.first());
        let stats = corpus_stats(&loaded.split, &w.graph);
        assert!((2.0..=3.0).contains(&stats.avg_mentions_per_example));
    }

    #[test]
    fn gold_alias_is_in_the_last_answer_sentence() {
        let w = world(5, 8).unwrap();
        for ex in corpus(&w, 50, 6) {
            let last = ex.answer.rsplit(". ").next().unwrap();
            let link = w.graph.link_entity(last).unwrap();
            assert_eq!(link.entity, ex.gold_entity, "{}", ex.answer);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = world(3, 10).unwrap();
        let b = world(3, 10).unwrap();
        assert_eq!(a.triples_tsv, b.triples_tsv);
        assert_eq!(corpus(&a, 20, 4), corpus(&b, 20, 4));
    }

    #[test]
    fn lattice_has_fifty_entities() {
        let g = lattice(5, 10).unwrap();
        assert_eq!(g.entities().len(), 50);
        assert_eq!(g.edges().len(), 5 * 9 + 4 * 10 + 4 * 9);
    }

    #[test]
    fn worked_example_validates() {
        let (w, exs) = worked_example().unwrap();
        for ex in &exs {
            ex.validate(&w.graph).unwrap();
        }
    }
}
