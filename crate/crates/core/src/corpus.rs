//! Corpus ingestion, validation, preprocessing, splitting, and merging for
//! the two-task bilingual dataset.
//!
//! The canonical on-disk form is a UTF-8 TSV with LF line endings and the
//! column order `id`, `language`, `label`, `text`. An optional header line is
//! recognized by exact match. Files ending in `.gz` are read through a gzip
//! decoder.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Exact header line recognized (and written) by the TSV codec.
pub const TSV_HEADER: &str = "id\tlanguage\tlabel\ttext";

/// Sentence punctuation retained by [`preprocess`] in both modes.
pub const SENTENCE_PUNCT: [char; 8] = ['.', '!', '?', ',', ';', ':', '\'', '"'];

/// Language tag carried by every document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Language {
    En,
    Es,
}

impl Language {
    pub const ALL: [Language; 2] = [Language::En, Language::Es];

    pub fn code(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Es => "es",
        }
    }

    pub fn parse(s: &str) -> Option<Language> {
        match s {
            "en" => Some(Language::En),
            "es" => Some(Language::Es),
            _ => None,
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// The two classification tasks: generated-vs-human detection and
/// six-way generator attribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Task {
    Detection,
    Attribution,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Detection => "detection",
            Task::Attribution => "attribution",
        }
    }

    pub fn parse(s: &str) -> Option<Task> {
        match s {
            "detection" => Some(Task::Detection),
            "attribution" => Some(Task::Attribution),
            _ => None,
        }
    }

    /// The task's full class list, in canonical order.
    pub fn classes(self) -> &'static [TaskLabel] {
        match self {
            Task::Detection => &[TaskLabel::Generated, TaskLabel::Human],
            Task::Attribution => &[
                TaskLabel::A,
                TaskLabel::B,
                TaskLabel::C,
                TaskLabel::D,
                TaskLabel::E,
                TaskLabel::F,
            ],
        }
    }

    /// Parses a label string, enforcing the task's label domain.
    pub fn parse_label(self, s: &str) -> Result<TaskLabel> {
        let label = match (self, s) {
            (Task::Detection, "generated") => TaskLabel::Generated,
            (Task::Detection, "human") => TaskLabel::Human,
            (Task::Attribution, "A") => TaskLabel::A,
            (Task::Attribution, "B") => TaskLabel::B,
            (Task::Attribution, "C") => TaskLabel::C,
            (Task::Attribution, "D") => TaskLabel::D,
            (Task::Attribution, "E") => TaskLabel::E,
            (Task::Attribution, "F") => TaskLabel::F,
            _ => {
                return Err(Error::Validation(format!(
                    "label '{}' is not valid for task {} (expected one of: {})",
                    s,
                    self.name(),
                    self.classes()
                        .iter()
                        .map(|c| c.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                )))
            }
        };
        Ok(label)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A class label. Detection uses `generated`/`human`; attribution uses the
/// six generator codes `A`..`F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskLabel {
    Generated,
    Human,
    A,
    B,
    C,
    D,
    E,
    F,
}

impl TaskLabel {
    pub fn task(self) -> Task {
        match self {
            TaskLabel::Generated | TaskLabel::Human => Task::Detection,
            _ => Task::Attribution,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskLabel::Generated => "generated",
            TaskLabel::Human => "human",
            TaskLabel::A => "A",
            TaskLabel::B => "B",
            TaskLabel::C => "C",
            TaskLabel::D => "D",
            TaskLabel::E => "E",
            TaskLabel::F => "F",
        }
    }
}

impl fmt::Display for TaskLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Text-cleaning policy applied before any feature computation.
///
/// `StrictAscii` drops every non-ASCII code point; `UnicodeLetters` keeps
/// letters and digits from any script. `UnicodeLetters` is the default since
/// ASCII stripping destroys Spanish diacritics; `StrictAscii` remains
/// available for literal replication of the ASCII-cleaning setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PreprocessMode {
    StrictAscii,
    UnicodeLetters,
}

impl Default for PreprocessMode {
    fn default() -> Self {
        PreprocessMode::UnicodeLetters
    }
}

impl PreprocessMode {
    pub fn name(self) -> &'static str {
        match self {
            PreprocessMode::StrictAscii => "strict-ascii",
            PreprocessMode::UnicodeLetters => "unicode",
        }
    }

    pub fn parse(s: &str) -> Option<PreprocessMode> {
        match s {
            "strict-ascii" | "strict_ascii" => Some(PreprocessMode::StrictAscii),
            "unicode" | "unicode-letters" | "unicode_letters" => {
                Some(PreprocessMode::UnicodeLetters)
            }
            _ => None,
        }
    }
}

impl fmt::Display for PreprocessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One corpus row.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub language: Language,
    pub label: TaskLabel,
    pub raw_text: String,
    /// Filled by [`Corpus::preprocess_all`]; empty until then.
    pub clean_text: String,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        language: Language,
        label: TaskLabel,
        raw_text: impl Into<String>,
    ) -> Document {
        Document {
            id: id.into(),
            language,
            label,
            raw_text: raw_text.into(),
            clean_text: String::new(),
        }
    }
}

/// Which partition a corpus belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitTag {
    Train,
    Valid,
    Test,
    Unsplit,
}

impl SplitTag {
    pub fn name(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Valid => "valid",
            SplitTag::Test => "test",
            SplitTag::Unsplit => "unsplit",
        }
    }
}

/// An ordered collection of documents sharing one task.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub task: Task,
    pub documents: Vec<Document>,
    pub split_tag: SplitTag,
}

impl Corpus {
    /// Builds a corpus, enforcing the document invariants: nonempty unique
    /// ids, nonempty raw text, and labels drawn from the task's domain.
    pub fn new(task: Task, documents: Vec<Document>, split_tag: SplitTag) -> Result<Corpus> {
        let mut seen = HashSet::with_capacity(documents.len());
        for doc in &documents {
            if doc.id.is_empty() {
                return Err(Error::Validation("document with empty id".into()));
            }
            if doc.raw_text.is_empty() {
                return Err(Error::Validation(format!(
                    "document '{}' has empty text",
                    doc.id
                )));
            }
            if doc.label.task() != task {
                return Err(Error::Validation(format!(
                    "document '{}' has label '{}' which is not valid for task {}",
                    doc.id, doc.label, task
                )));
            }
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::Validation(format!("duplicate document id '{}'", doc.id)));
            }
        }
        Ok(Corpus {
            task,
            documents,
            split_tag,
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Fills every document's `clean_text` with `preprocess(raw_text, mode)`.
    pub fn preprocess_all(&mut self, mode: PreprocessMode) {
        for doc in &mut self.documents {
            doc.clean_text = preprocess(&doc.raw_text, mode);
        }
    }

    /// Documents of one language, preserving order and split tag.
    pub fn by_language(&self, language: Language) -> Corpus {
        Corpus {
            task: self.task,
            documents: self
                .documents
                .iter()
                .filter(|d| d.language == language)
                .cloned()
                .collect(),
            split_tag: self.split_tag,
        }
    }

    /// Languages present, in canonical order.
    pub fn languages(&self) -> Vec<Language> {
        Language::ALL
            .iter()
            .copied()
            .filter(|l| self.documents.iter().any(|d| d.language == *l))
            .collect()
    }

    /// Appends another corpus of the same task, revalidating id uniqueness.
    pub fn concat(self, other: Corpus) -> Result<Corpus> {
        merge_bilingual(&self, &other)
    }
}

/// Removes disallowed characters and normalizes whitespace.
///
/// Both modes keep digits, spaces, and the sentence punctuation
/// `. ! ? , ; : ' "`. `StrictAscii` keeps only ASCII letters and digits;
/// `UnicodeLetters` keeps letters and digits from any script. Runs of
/// whitespace collapse to one space and the result is trimmed. Idempotent.
pub fn preprocess(raw: &str, mode: PreprocessMode) -> String {
    let keep = |c: char| {
        let alnum = match mode {
            PreprocessMode::StrictAscii => c.is_ascii_alphanumeric(),
            PreprocessMode::UnicodeLetters => c.is_alphabetic() || c.is_numeric(),
        };
        alnum || SENTENCE_PUNCT.contains(&c)
    };
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for c in raw.chars() {
        if c.is_whitespace() {
            pending_space = true;
        } else if keep(c) {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        }
    }
    out
}

/// Parses the canonical 4-column TSV into a corpus.
///
/// Every non-header line must have exactly the fields `id`, `language`,
/// `label`, `text`. The first line is skipped when it equals [`TSV_HEADER`].
/// Errors carry 1-based line numbers.
pub fn parse_tsv<R: BufRead>(reader: R, task: Task) -> Result<Corpus> {
    let mut documents = Vec::new();
    let mut ids = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if idx == 0 && line == TSV_HEADER {
            continue;
        }
        if line.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                msg: "empty line".into(),
            });
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let (id, lang, label, text) = (fields[0], fields[1], fields[2], fields[3]);
        if id.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                msg: "empty id".into(),
            });
        }
        if text.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("document '{id}' has empty text"),
            });
        }
        let language = Language::parse(lang).ok_or_else(|| Error::Validation(format!(
            "line {line_no}: unknown language code '{lang}' (expected en or es)"
        )))?;
        let label = task.parse_label(label).map_err(|e| {
            Error::Validation(format!("line {line_no}: {e}"))
        })?;
        if !ids.insert(id.to_string()) {
            return Err(Error::Validation(format!(
                "line {line_no}: duplicate document id '{id}'"
            )));
        }
        documents.push(Document::new(id, language, label, text));
    }
    Corpus::new(task, documents, SplitTag::Unsplit)
}

/// Writes a corpus in the canonical TSV form (header + one row per document,
/// LF line endings, raw text verbatim).
pub fn write_tsv<W: Write>(corpus: &Corpus, mut writer: W) -> Result<()> {
    writeln!(writer, "{TSV_HEADER}")?;
    for doc in &corpus.documents {
        writeln!(
            writer,
            "{}\t{}\t{}\t{}",
            doc.id, doc.language, doc.label, doc.raw_text
        )?;
    }
    Ok(())
}

/// Reads a corpus file; `.gz` paths are decompressed on the fly.
pub fn read_corpus_file(path: impl AsRef<Path>, task: Task) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        parse_tsv(BufReader::new(flate2::read::GzDecoder::new(file)), task)
    } else {
        parse_tsv(BufReader::new(file), task)
    }
}

/// Writes a corpus to `path` in canonical TSV form.
pub fn write_corpus_file(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_tsv(corpus, &mut writer)?;
    writer.flush()?;
    Ok(())
}

/// Largest-remainder apportionment of `n` items over `fractions`.
/// Every part differs from `n * fraction` by less than one item.
fn apportion(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let mut counts = [0usize; 3];
    let mut remainders = [(0usize, 0.0f64); 3];
    let mut assigned = 0;
    for (i, &f) in fractions.iter().enumerate() {
        let target = n as f64 * f;
        counts[i] = target.floor() as usize;
        assigned += counts[i];
        remainders[i] = (i, target - target.floor());
    }
    // Distribute the leftover to the largest remainders; ties go to the
    // earlier split so the result is deterministic.
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for r in remainders.iter().take(n - assigned) {
        counts[r.0] += 1;
    }
    counts
}

/// Stratified train/valid/test split, deterministic for a given seed.
///
/// Per-class counts follow the fractions to within one document. Classes are
/// shuffled independently; output corpora preserve the input document order.
pub fn split_corpus(
    corpus: &Corpus,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Corpus, Corpus, Corpus)> {
    let fr = [fractions.0, fractions.1, fractions.2];
    if fr.iter().any(|&f| f < 0.0 || !f.is_finite()) {
        return Err(Error::Validation(format!(
            "split fractions must be nonnegative, got {fr:?}"
        )));
    }
    if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!(
            "split fractions must sum to 1, got {fr:?}"
        )));
    }

    let mut by_class: HashMap<TaskLabel, Vec<usize>> = HashMap::new();
    for (i, doc) in corpus.documents.iter().enumerate() {
        by_class.entry(doc.label).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // split index (0 train, 1 valid, 2 test) per document
    let mut assignment = vec![0u8; corpus.len()];
    for class in corpus.task.classes() {
        let Some(members) = by_class.get(class) else {
            continue;
        };
        let counts = apportion(members.len(), &fr);
        for (s, &count) in counts.iter().enumerate() {
            if fr[s] > 0.0 && count == 0 {
                return Err(Error::InsufficientData(format!(
                    "class '{}' has {} documents, too few to give every split at least one",
                    class,
                    members.len()
                )));
            }
        }
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        for (pos, &doc_idx) in shuffled.iter().enumerate() {
            assignment[doc_idx] = if pos < counts[0] {
                0
            } else if pos < counts[0] + counts[1] {
                1
            } else {
                2
            };
        }
    }

    let mut parts: [Vec<Document>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (i, doc) in corpus.documents.iter().enumerate() {
        parts[assignment[i] as usize].push(doc.clone());
    }
    let [train, valid, test] = parts;
    Ok((
        Corpus {
            task: corpus.task,
            documents: train,
            split_tag: SplitTag::Train,
        },
        Corpus {
            task: corpus.task,
            documents: valid,
            split_tag: SplitTag::Valid,
        },
        Corpus {
            task: corpus.task,
            documents: test,
            split_tag: SplitTag::Test,
        },
    ))
}

/// Concatenates two same-task corpora, keeping per-document language tags.
pub fn merge_bilingual(en: &Corpus, es: &Corpus) -> Result<Corpus> {
    if en.task != es.task {
        return Err(Error::Validation(format!(
            "cannot merge corpora with different tasks ({} vs {})",
            en.task, es.task
        )));
    }
    let mut documents = Vec::with_capacity(en.len() + es.len());
    documents.extend_from_slice(&en.documents);
    documents.extend_from_slice(&es.documents);
    let split_tag = if en.split_tag == es.split_tag || es.is_empty() {
        en.split_tag
    } else if en.is_empty() {
        es.split_tag
    } else {
        SplitTag::Unsplit
    };
    Corpus::new(en.task, documents, split_tag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn doc(id: &str, lang: Language, label: TaskLabel, text: &str) -> Document {
        Document::new(id, lang, label, text)
    }

    fn tiny_corpus(task: Task, n_per_class: usize) -> Corpus {
        let classes = task.classes();
        let mut docs = Vec::new();
        for (k, class) in classes.iter().enumerate() {
            for i in 0..n_per_class {
                docs.push(doc(
                    &format!("{}-{}", class, i),
                    if i % 2 == 0 { Language::En } else { Language::Es },
                    *class,
                    &format!("text number {i} of class {k}."),
                ));
            }
        }
        Corpus::new(task, docs, SplitTag::Unsplit).unwrap()
    }

    #[test]
    fn parse_single_detection_row() {
        let corpus = parse_tsv(Cursor::new("d1\ten\thuman\tHello world"), Task::Detection).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.documents[0].label, TaskLabel::Human);
        assert_eq!(corpus.documents[0].raw_text, "Hello world");
    }

    #[test]
    fn parse_rejects_label_outside_task_domain() {
        let err = parse_tsv(Cursor::new("d1\ten\tZ\tHello"), Task::Attribution).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
        let err = parse_tsv(Cursor::new("d1\ten\tA\tHello"), Task::Detection).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn parse_reports_line_numbers_for_malformed_rows() {
        let input = "d1\ten\thuman\tok\nd2\ten\thuman\nd3\ten\thuman\tok";
        let err = parse_tsv(Cursor::new(input), Task::Detection).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn parse_rejects_duplicate_ids_and_unknown_language() {
        let dup = "d1\ten\thuman\ta\nd1\tes\tgenerated\tb";
        assert!(matches!(
            parse_tsv(Cursor::new(dup), Task::Detection),
            Err(Error::Validation(_))
        ));
        let lang = "d1\tfr\thuman\ta";
        assert!(matches!(
            parse_tsv(Cursor::new(lang), Task::Detection),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn parse_skips_exact_header() {
        let input = format!("{TSV_HEADER}\nd1\ten\tgenerated\thi");
        let corpus = parse_tsv(Cursor::new(input), Task::Detection).unwrap();
        assert_eq!(corpus.len(), 1);
    }

    #[test]
    fn parse_table_scale_corpus() {
        // English detection train split size from the dataset statistics.
        let mut input = String::new();
        for i in 0..27_414 {
            let label = if i % 2 == 0 { "generated" } else { "human" };
            input.push_str(&format!("d{i}\ten\t{label}\ttext {i}\n"));
        }
        let corpus = parse_tsv(Cursor::new(input), Task::Detection).unwrap();
        assert_eq!(corpus.len(), 27_414);
    }

    #[test]
    fn gzip_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = tiny_corpus(Task::Detection, 4);
        let path = dir.path().join("c.tsv.gz");
        let file = File::create(&path).unwrap();
        let mut enc = flate2::write::GzEncoder::new(file, flate2::Compression::default());
        write_tsv(&corpus, &mut enc).unwrap();
        enc.finish().unwrap();
        let back = read_corpus_file(&path, Task::Detection).unwrap();
        assert_eq!(back, corpus);
    }

    #[test]
    fn preprocess_strict_ascii_drops_non_ascii() {
        assert_eq!(preprocess("café™", PreprocessMode::StrictAscii), "caf");
    }

    #[test]
    fn preprocess_unicode_keeps_letters() {
        assert_eq!(preprocess("café™", PreprocessMode::UnicodeLetters), "café");
    }

    #[test]
    fn preprocess_collapses_whitespace() {
        for mode in [PreprocessMode::StrictAscii, PreprocessMode::UnicodeLetters] {
            assert_eq!(preprocess("a\t b\n\nc", mode), "a b c");
        }
    }

    #[test]
    fn preprocess_keeps_sentence_punctuation() {
        assert_eq!(
            preprocess("Wait... really?! \"yes\"; ok: a,b 'c'", PreprocessMode::StrictAscii),
            "Wait... really?! \"yes\"; ok: a,b 'c'"
        );
    }

    #[test]
    fn split_identity_fractions() {
        let corpus = tiny_corpus(Task::Detection, 10);
        let (train, valid, test) = split_corpus(&corpus, (1.0, 0.0, 0.0), 0).unwrap();
        assert_eq!(train.len(), corpus.len());
        assert!(valid.is_empty() && test.is_empty());
        assert_eq!(train.split_tag, SplitTag::Train);
    }

    #[test]
    fn split_is_deterministic() {
        let corpus = tiny_corpus(Task::Attribution, 30);
        let a = split_corpus(&corpus, (0.8, 0.1, 0.1), 7).unwrap();
        let b = split_corpus(&corpus, (0.8, 0.1, 0.1), 7).unwrap();
        assert_eq!(a, b);
        let c = split_corpus(&corpus, (0.8, 0.1, 0.1), 8).unwrap();
        assert_ne!(a.0.documents, c.0.documents);
    }

    #[test]
    fn split_reproduces_dataset_statistics_proportions() {
        // 33,845 English detection documents split with the published
        // proportions should land on 27,414 / 3,046 / 3,385 (±1 per class).
        let total = 33_845usize;
        let mut docs = Vec::with_capacity(total);
        for i in 0..total {
            let label = if i < total / 2 { TaskLabel::Generated } else { TaskLabel::Human };
            docs.push(doc(&format!("d{i}"), Language::En, label, "x y z."));
        }
        let corpus = Corpus::new(Task::Detection, docs, SplitTag::Unsplit).unwrap();
        let fr = (
            27_414.0 / 33_845.0,
            3_046.0 / 33_845.0,
            3_385.0 / 33_845.0,
        );
        let (train, valid, test) = split_corpus(&corpus, fr, 0).unwrap();
        assert_eq!(train.len() + valid.len() + test.len(), total);
        assert!((train.len() as i64 - 27_414).abs() <= 2, "train={}", train.len());
        assert!((valid.len() as i64 - 3_046).abs() <= 2, "valid={}", valid.len());
        assert!((test.len() as i64 - 3_385).abs() <= 2, "test={}", test.len());
    }

    #[test]
    fn split_insufficient_data_per_class() {
        let corpus = tiny_corpus(Task::Detection, 2);
        let err = split_corpus(&corpus, (0.8, 0.1, 0.1), 0).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)), "{err}");
    }

    #[test]
    fn split_stratification_within_one_document() {
        let corpus = tiny_corpus(Task::Detection, 103);
        let fr = (0.7, 0.2, 0.1);
        let (train, valid, test) = split_corpus(&corpus, fr, 3).unwrap();
        for class in Task::Detection.classes() {
            let count = |c: &Corpus| c.documents.iter().filter(|d| d.label == *class).count();
            let n = 103f64;
            assert!((count(&train) as f64 - fr.0 * n).abs() < 1.0);
            assert!((count(&valid) as f64 - fr.1 * n).abs() < 1.0);
            assert!((count(&test) as f64 - fr.2 * n).abs() < 1.0);
        }
    }

    #[test]
    fn merge_sizes_add_up() {
        // Sizes from the dataset statistics: 27,414 en + 25,969 es train rows.
        let mk = |n: usize, lang: Language, prefix: &str| {
            let docs = (0..n)
                .map(|i| {
                    doc(
                        &format!("{prefix}{i}"),
                        lang,
                        if i % 2 == 0 { TaskLabel::Generated } else { TaskLabel::Human },
                        "t.",
                    )
                })
                .collect();
            Corpus::new(Task::Detection, docs, SplitTag::Train).unwrap()
        };
        let en = mk(27_414, Language::En, "en");
        let es = mk(25_969, Language::Es, "es");
        let merged = merge_bilingual(&en, &es).unwrap();
        assert_eq!(merged.len(), 53_383);
        // Grouping by language recovers the originals.
        assert_eq!(merged.by_language(Language::En).documents, en.documents);
        assert_eq!(merged.by_language(Language::Es).documents, es.documents);
    }

    #[test]
    fn merge_empty_is_identity() {
        let en = tiny_corpus(Task::Detection, 3);
        let es = Corpus::new(Task::Detection, vec![], SplitTag::Unsplit).unwrap();
        let merged = merge_bilingual(&en, &es).unwrap();
        assert_eq!(merged.documents, en.documents);
        assert_eq!(merged.split_tag, en.split_tag);
    }

    #[test]
    fn merge_rejects_task_mismatch() {
        let en = tiny_corpus(Task::Detection, 2);
        let es = tiny_corpus(Task::Attribution, 2);
        assert!(matches!(merge_bilingual(&en, &es), Err(Error::Validation(_))));
    }

    proptest! {
        #[test]
        fn preprocess_is_idempotent(raw in "\\PC{0,200}") {
            for mode in [PreprocessMode::StrictAscii, PreprocessMode::UnicodeLetters] {
                let once = preprocess(&raw, mode);
                prop_assert_eq!(preprocess(&once, mode), once.clone());
            }
        }

        #[test]
        fn tsv_round_trip(
            rows in proptest::collection::vec(
                ("[a-z0-9]{1,8}", 0..2usize, 0..2usize, "[a-zA-Z0-9 .!?,;:'\"]{1,40}"),
                1..20,
            )
        ) {
            let mut docs = Vec::new();
            let mut seen = HashSet::new();
            for (i, (id, lang, label, text)) in rows.into_iter().enumerate() {
                let id = format!("{id}-{i}");
                if !seen.insert(id.clone()) { continue; }
                let lang = Language::ALL[lang];
                let label = Task::Detection.classes()[label];
                docs.push(Document::new(id, lang, label, text));
            }
            let corpus = Corpus::new(Task::Detection, docs, SplitTag::Unsplit).unwrap();
            let mut buf = Vec::new();
            write_tsv(&corpus, &mut buf).unwrap();
            let back = parse_tsv(Cursor::new(buf), Task::Detection).unwrap();
            prop_assert_eq!(back, corpus);
        }

        #[test]
        fn split_sizes_sum_to_input(per_class in 3usize..40, seed in 0u64..20) {
            let corpus = tiny_corpus(Task::Detection, per_class);
            let (train, valid, test) = split_corpus(&corpus, (0.6, 0.2, 0.2), seed).unwrap();
            prop_assert_eq!(train.len() + valid.len() + test.len(), corpus.len());
            // Disjointness: every id appears exactly once across the splits.
            let mut ids = HashSet::new();
            for c in [&train, &valid, &test] {
                for d in &c.documents {
                    prop_assert!(ids.insert(d.id.clone()));
                }
            }
        }
    }
}
