use rand::distributions::WeightedIndex;
use rand::prelude::*;

use super::grammar::{DomainGrammar, PatternPiece, Piece};
use super::{Dataset, Label, Token, Utterance};
use crate::seed;
use crate::{Error, Result};

/// Stand-in for an external tagger/parser: lemma and POS from the grammar
/// dictionary, semantic categories from the lexicon and a head-attachment
/// heuristic for governors and relations.
#[derive(Clone, Copy, Debug)]
pub struct Annotator<'g> {
    grammar: &'g DomainGrammar,
}

fn is_nominal(pos: &str) -> bool {
    matches!(pos, "NOUN" | "PROPN")
}

impl<'g> Annotator<'g> {
    pub fn new(grammar: &'g DomainGrammar) -> Self {
        Annotator { grammar }
    }

    fn pos_lemma(&self, word: &str, covering: &std::collections::BTreeSet<String>) -> (String, String) {
        let lower = word.to_lowercase();
        if let Some((p, l)) = self.grammar.pos.get(&lower) {
            return (p.clone(), l.clone());
        }
        let cat_pos = covering
            .iter()
            .find_map(|c| self.grammar.category_pos.get(c))
            .cloned();
        (cat_pos.unwrap_or_else(|| "NOUN".into()), lower)
    }

    /// Fully annotated tokens for `surfaces`; labels are null and the
    /// confidence and error columns are absent.
    pub fn annotate<S: AsRef<str>>(&self, surfaces: &[S]) -> Vec<Token> {
        let covering = self.grammar.lexicon.covering_categories(surfaces);
        let mut tokens: Vec<Token> = surfaces
            .iter()
            .zip(&covering)
            .map(|(s, cats)| {
                let mut t = Token::new(s.as_ref());
                let (pos, lemma) = self.pos_lemma(s.as_ref(), cats);
                t.pos = pos;
                t.lemma = lemma;
                t.sem_categories = cats.iter().cloned().collect();
                t
            })
            .collect();
        attach(&mut tokens);
        tokens
    }
}

fn attach(tokens: &mut [Token]) {
    let n = tokens.len();
    if n == 0 {
        return;
    }
    let pos: Vec<String> = tokens.iter().map(|t| t.pos.clone()).collect();
    let root = pos
        .iter()
        .position(|p| p == "VERB")
        .or_else(|| pos.iter().position(|p| p == "AUX"))
        .or_else(|| pos.iter().position(|p| is_nominal(p)))
        .unwrap_or(0);
    let right = |i: usize, within: usize, pred: &dyn Fn(&str) -> bool| {
        (i + 1..n.min(i + 1 + within)).find(|&j| pred(&pos[j]))
    };
    let mut heads: Vec<(Option<usize>, &str)> = vec![(None, "dep"); n];
    for i in 0..n {
        if i == root {
            heads[i] = (None, "root");
            continue;
        }
        let to_root = Some(root);
        heads[i] = match pos[i].as_str() {
            "DET" | "NUM" | "ADJ" => match right(i, 3, &is_nominal) {
                Some(j) => (
                    Some(j),
                    match pos[i].as_str() {
                        "DET" => "det",
                        "NUM" => "nummod",
                        _ => "amod",
                    },
                ),
                None => (to_root, "dep"),
            },
            "ADP" => match right(i, 4, &|p| is_nominal(p) || p == "NUM" || p == "PRON") {
                Some(j) => (Some(j), "case"),
                None => (to_root, "dep"),
            },
            "PART" => match right(i, 2, &|p| p == "VERB") {
                Some(j) => (Some(j), "mark"),
                None => (to_root, "advmod"),
            },
            "AUX" => match right(i, 3, &|p| p == "VERB") {
                Some(j) => (Some(j), "aux"),
                None => (to_root, "cop"),
            },
            "CCONJ" => match right(i, 3, &|p| is_nominal(p) || matches!(p, "VERB" | "ADJ" | "NUM")) {
                Some(j) => (Some(j), "cc"),
                None => (to_root, "cc"),
            },
            "PRON" => (to_root, if i < root { "nsubj" } else { "obj" }),
            "PROPN" if i > 0 && pos[i - 1] == "PROPN" => (Some(i - 1), "flat"),
            "NOUN" | "PROPN" => (to_root, if i < root { "nsubj" } else { "obj" }),
            "VERB" => (to_root, "xcomp"),
            "ADV" => (to_root, "advmod"),
            "INTJ" => (to_root, "discourse"),
            _ => (to_root, "dep"),
        };
    }
    // Nominals introduced by a preposition are obliques.
    for i in 0..n {
        if heads[i].1 == "case" {
            if let Some(j) = heads[i].0 {
                if heads[j].1 == "obj" || heads[j].1 == "nsubj" {
                    heads[j].1 = "obl";
                }
            }
        }
    }
    for (t, (g, rel)) in tokens.iter_mut().zip(heads) {
        t.governor = g;
        t.deprel = rel.to_string();
    }
}

struct Sampler<'g> {
    grammar: &'g DomainGrammar,
    patterns: WeightedIndex<f64>,
    slots: std::collections::BTreeMap<&'g str, WeightedIndex<f64>>,
}

impl<'g> Sampler<'g> {
    fn new(grammar: &'g DomainGrammar) -> Result<Self> {
        let weights = |w: Vec<f64>| WeightedIndex::new(w).map_err(|e| Error::Config(e.to_string()));
        let patterns = weights(grammar.patterns.iter().map(|p| p.weight).collect())?;
        let mut slots = std::collections::BTreeMap::new();
        for (name, reals) in &grammar.slots {
            slots.insert(name.as_str(), weights(reals.iter().map(|r| r.weight).collect())?);
        }
        Ok(Sampler {
            grammar,
            patterns,
            slots,
        })
    }

    fn realize<R: Rng>(&self, concept: &str, rng: &mut R, out: &mut Vec<(String, Label)>) {
        let reals = &self.grammar.slots[concept];
        let r = &reals[self.slots[concept].sample(rng)];
        let start = out.len();
        for piece in &r.pieces {
            match piece {
                Piece::Word(w) => out.push((w.clone(), Label::Null)),
                Piece::Category { name, range } => {
                    let choices = self.grammar.category_choices(name, *range);
                    let e = self.grammar.lexicon.entry(choices[rng.gen_range(0..choices.len())]);
                    out.extend(e.surface.iter().map(|w| (w.clone(), Label::Null)));
                }
            }
        }
        for (k, (_, l)) in out[start..].iter_mut().enumerate() {
            *l = if k == 0 {
                Label::Begin(concept.to_string())
            } else {
                Label::Inside(concept.to_string())
            };
        }
    }

    fn utterance(&self, id: String, seed: u64) -> Utterance {
        let mut rng = seed::rng(seed::derive(seed, &id));
        let pattern = &self.grammar.patterns[self.patterns.sample(&mut rng)];
        let mut words: Vec<(String, Label)> = Vec::new();
        for piece in &pattern.pieces {
            match piece {
                PatternPiece::Word(w) => words.push((w.clone(), Label::Null)),
                PatternPiece::Slot { concept, optional } => {
                    if *optional && rng.gen_bool(0.5) {
                        continue;
                    }
                    self.realize(concept, &mut rng, &mut words);
                }
            }
        }
        let surfaces: Vec<&str> = words.iter().map(|(w, _)| w.as_str()).collect();
        let mut tokens = Annotator::new(self.grammar).annotate(&surfaces);
        for (t, (_, l)) in tokens.iter_mut().zip(words) {
            t.label = l;
        }
        Utterance {
            id,
            tokens,
            reference: None,
        }
    }
}

/// Draw `n` labelled utterances with ids `<prefix><index:06>`. Each
/// utterance uses its own seed derived from `seed` and its id, so the
/// corpus is reproducible and any prefix of it is stable under growth.
pub fn generate_corpus(grammar: &DomainGrammar, n: usize, seed: u64, prefix: &str) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("corpus size must be at least 1".into()));
    }
    let sampler = Sampler::new(grammar)?;
    let utterances = (0..n)
        .map(|i| sampler.utterance(format!("{prefix}{i:06}"), seed))
        .collect();
    Dataset::new(utterances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::segments_of;

    #[test]
    fn same_seed_same_corpus() {
        let g = DomainGrammar::default_grammar();
        let a = generate_corpus(&g, 1, 3, "u").unwrap();
        let b = generate_corpus(&g, 1, 3, "u").unwrap();
        assert_eq!(a, b);
        let c = generate_corpus(&g, 20, 4, "u").unwrap();
        let d = generate_corpus(&g, 20, 3, "u").unwrap();
        assert_ne!(c, d);
    }

    #[test]
    fn zero_size_rejected() {
        let g = DomainGrammar::default_grammar();
        assert!(generate_corpus(&g, 0, 1, "u").is_err());
    }

    #[test]
    fn annotations_are_well_formed() {
        let g = DomainGrammar::default_grammar();
        let d = generate_corpus(&g, 300, 11, "u").unwrap();
        for u in &d.utterances {
            let roots = u.tokens.iter().filter(|t| t.governor.is_none()).count();
            assert_eq!(roots, 1, "{:?}", u.surfaces());
            assert!(!segments_of(&u.tokens, &g.lexicon).is_empty() || u.labels().iter().all(Label::is_null));
        }
    }

    #[test]
    fn annotator_tags_lexicon_words() {
        let g = DomainGrammar::default_grammar();
        let t = Annotator::new(&g).annotate(&["i", "want", "Paris", "thirty", "three"]);
        assert_eq!(t[2].pos, "PROPN");
        assert_eq!(t[2].sem_categories, vec!["TOWN".to_string()]);
        assert_eq!(t[3].sem_categories, vec!["FIGURE".to_string()]);
        assert_eq!(t[1].governor, None);
    }
}
