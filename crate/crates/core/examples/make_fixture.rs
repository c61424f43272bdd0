//! Regenerate the miniature benchmark under `tests/fixtures/mini`.
//!
//! Pages, paragraphs and embeddings are synthetic: every page has its own
//! pseudo-word vocabulary, each section adds a narrower one, and paragraph
//! vectors combine a page direction with a section direction plus noise.
//!
//! ```text
//! cargo run -p artgen-core --example make_fixture [-- <output-dir>]
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use artgen::benchmark::{derive_benchmark, slug, ArticleOutline, OutlineSection, QrelKey, Qrels};
use artgen::corpus::{Corpus, Paragraph};
use artgen::io::{jsonl_string, write_atomic};
use artgen::simmetric::{lead_key, paragraph_key, title_key, EmbeddingStore};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const SEED: u64 = 2024;
const PAGES: usize = 30;
const DIM: usize = 16;
const DISTRACTORS: usize = 60;

struct Words {
    rng: ChaCha8Rng,
    used: BTreeSet<String>,
}

impl Words {
    fn word(&mut self) -> String {
        const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st"];
        const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ai"];
        loop {
            let syllables = self.rng.random_range(2..4);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS.choose(&mut self.rng).unwrap());
                w.push_str(VOWELS.choose(&mut self.rng).unwrap());
            }
            if self.rng.random_bool(0.5) {
                w.push_str(["n", "r", "s", "l"].choose(&mut self.rng).unwrap());
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn words(&mut self, n: usize) -> Vec<String> {
        (0..n).map(|_| self.word()).collect()
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next()
        .map(|f| f.to_uppercase().collect::<String>() + c.as_str())
        .unwrap_or_default()
}

fn sentence(rng: &mut ChaCha8Rng, pools: &[(&[String], f64)]) -> String {
    let len = rng.random_range(6..11);
    let total: f64 = pools.iter().map(|p| p.1).sum();
    let mut words = Vec::with_capacity(len);
    for _ in 0..len {
        let mut x = rng.random::<f64>() * total;
        let pool = pools
            .iter()
            .find(|p| {
                x -= p.1;
                x <= 0.0
            })
            .unwrap_or(&pools[pools.len() - 1]);
        words.push(pool.0.choose(rng).unwrap().clone());
    }
    words[0] = capitalize(&words[0]);
    words.join(" ") + "."
}

fn unit(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..DIM).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn combine(parts: &[(&[f64], f64)]) -> Vec<f64> {
    let mut out = vec![0.0; DIM];
    for (v, w) in parts {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += w * x;
        }
    }
    out
}

fn round(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| (x * 1e6).round() / 1e6).collect()
}

fn main() -> artgen::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini"));
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut words = Words {
        rng: ChaCha8Rng::seed_from_u64(SEED + 1),
        used: BTreeSet::new(),
    };
    let filler = words.words(150);

    let mut paragraphs = Vec::new();
    let mut outlines = Vec::new();
    let mut store = EmbeddingStore::new(DIM)?;
    let mut manual = Qrels::new();

    for page in 0..PAGES {
        let page_id = format!("t{page:02}");
        let title_words = words.words(2);
        let title = title_words.iter().map(|w| capitalize(w)).collect::<Vec<_>>().join(" ");
        let topic_words = words.words(8);
        let topic_dir = unit(&mut rng);

        let lead = [
            sentence(&mut rng, &[(&title_words, 2.0), (&topic_words, 3.0), (&filler, 4.0)]),
            sentence(&mut rng, &[(&title_words, 1.0), (&topic_words, 3.0), (&filler, 4.0)]),
        ]
        .join(" ");
        store.insert(title_key(&page_id), round(combine(&[(&topic_dir, 1.0), (&unit(&mut rng), 0.3)])))?;
        store.insert(lead_key(&page_id), round(combine(&[(&topic_dir, 1.0), (&unit(&mut rng), 0.2)])))?;

        // two pages have a single section and are skipped by the deriver
        let n_sections = if page % 15 == 7 { 1 } else { rng.random_range(3..6) };
        let mut sections = Vec::new();
        let mut page_paragraphs: Vec<(String, usize)> = Vec::new();
        for s in 0..n_sections {
            let heading_words = words.words(rng.random_range(1..3));
            let heading = heading_words.iter().map(|w| capitalize(w)).collect::<Vec<_>>().join(" ");
            let mut section_words = words.words(10);
            section_words.extend(heading_words.iter().cloned());
            let section_dir = unit(&mut rng);
            let key_sentence = sentence(&mut rng, &[(&section_words, 5.0), (&topic_words, 2.0), (&filler, 2.0)]);
            let n_paras = rng.random_range(4..7);
            let mut ids = Vec::new();
            for p in 0..n_paras {
                let id = format!("{page_id}-s{s}-p{p}");
                let mut sentences = Vec::new();
                if rng.random_bool(0.5) {
                    sentences.push(key_sentence.clone());
                }
                for _ in 0..rng.random_range(2..4) {
                    let with_title = if rng.random_bool(0.5) { 1.5 } else { 0.0 };
                    sentences.push(sentence(
                        &mut rng,
                        &[
                            (&section_words, 4.0),
                            (&topic_words, 2.0),
                            (&filler, 4.0),
                            (&title_words, with_title),
                        ],
                    ));
                }
                sentences.shuffle(&mut rng);
                paragraphs.push(Paragraph {
                    id: id.clone(),
                    text: sentences.join(" "),
                });
                let v = combine(&[(&topic_dir, 1.0), (&section_dir, 0.6), (&unit(&mut rng), 0.6)]);
                store.insert(paragraph_key(&id), round(v))?;
                page_paragraphs.push((id.clone(), s));
                ids.push(id);
            }
            // occasionally move the tail of a section into a subsection
            let subsections = if ids.len() > 4 && rng.random_bool(0.3) {
                let tail = ids.split_off(ids.len() - 2);
                vec![OutlineSection {
                    heading: format!("{heading} details"),
                    paragraph_ids: tail,
                    subsections: vec![],
                }]
            } else {
                vec![]
            };
            sections.push((heading, ids, subsections));
        }

        let slugs: Vec<String> = sections.iter().map(|s| slug(&s.0)).collect();
        for (id, s) in &page_paragraphs {
            manual
                .insert(QrelKey::section(&page_id, &slugs[*s]), id, rng.random_range(1..4))
                .expect("fresh key");
            // some paragraphs are also judged for a second section
            if slugs.len() > 1 && rng.random_bool(0.15) {
                let other = (s + rng.random_range(1..slugs.len())) % slugs.len();
                manual
                    .insert(QrelKey::section(&page_id, &slugs[other]), id, rng.random_range(1..4))
                    .expect("fresh key");
            }
        }
        outlines.push(ArticleOutline {
            page_id,
            title,
            lead: Some(lead),
            sections: sections
                .into_iter()
                .map(|(heading, paragraph_ids, subsections)| OutlineSection {
                    heading,
                    paragraph_ids,
                    subsections,
                })
                .collect(),
        });
    }

    let distractor_pool: Vec<String> = paragraphs
        .iter()
        .flat_map(|p| p.text.split_whitespace().map(|w| w.trim_end_matches('.').to_lowercase()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    for i in 0..DISTRACTORS {
        let id = format!("x{i:03}");
        let text = (0..rng.random_range(2..4))
            .map(|_| sentence(&mut rng, &[(&filler, 6.0), (&distractor_pool, 1.0)]))
            .collect::<Vec<_>>()
            .join(" ");
        paragraphs.push(Paragraph { id: id.clone(), text });
        store.insert(paragraph_key(&id), round(unit(&mut rng)))?;
        // judged non-relevant for a random page
        let page = format!("t{:02}", rng.random_range(0..PAGES));
        if let Some(first) = outlines.iter().find(|o| o.page_id == page).map(|o| slug(&o.sections[0].heading)) {
            let _ = manual.insert(QrelKey::section(&page, &first), &id, 0);
        }
    }

    let corpus = Corpus::from_paragraphs(paragraphs, true)?;
    let bench = derive_benchmark(&outlines, &corpus, 2)?;
    std::fs::create_dir_all(&out).map_err(|e| artgen::Error::io(&out, e))?;
    write_atomic(&out.join("corpus.jsonl"), corpus.to_jsonl()?.as_bytes())?;
    write_atomic(&out.join("outlines.jsonl"), jsonl_string(&outlines)?.as_bytes())?;
    write_atomic(&out.join("embeddings.txt"), store.to_text().as_bytes())?;
    write_atomic(&out.join("manual_qrels.txt"), manual.to_trec().as_bytes())?;
    bench.write_dir(&out.join("benchmark"))?;
    let config = "\
corpus = \"corpus.jsonl\"
benchmark = \"benchmark\"
embeddings = \"embeddings.txt\"
manual_qrels = \"manual_qrels.txt\"
output = \"out\"
";
    write_atomic(&out.join("config.toml"), config.as_bytes())?;
    println!(
        "{}: {} paragraphs, {} pages, {} queries, {} skipped",
        out.display(),
        corpus.len(),
        outlines.len(),
        bench.queries.len(),
        bench.skipped.len()
    );
    Ok(())
}
