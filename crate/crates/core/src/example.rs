use crate::error::{Error, Result};
use crate::nfc;

/// One wordform inside its tokenized sentence, labeled with its lemma.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ContextualExample {
    pub sentence: Vec<String>,
    pub target_index: usize,
    pub form: String,
    pub lemma: String,
}

impl ContextualExample {
    /// Builds an example, taking the form from the sentence.
    pub fn new(
        sentence: Vec<String>,
        target_index: usize,
        lemma: impl Into<String>,
    ) -> Result<Self> {
        let form = sentence.get(target_index).cloned().ok_or_else(|| {
            Error::Input(format!(
                "target index {target_index} outside sentence of length {}",
                sentence.len()
            ))
        })?;
        let lemma = lemma.into();
        if form.is_empty() || lemma.is_empty() {
            return Err(Error::Input("empty form or lemma".into()));
        }
        Ok(ContextualExample {
            sentence,
            target_index,
            form,
            lemma,
        })
    }

    /// An example with no surrounding context: the sentence is the form alone.
    pub fn isolated(form: &str, lemma: &str) -> Self {
        ContextualExample {
            sentence: vec![form.to_owned()],
            target_index: 0,
            form: form.to_owned(),
            lemma: lemma.to_owned(),
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.sentence.get(self.target_index) == Some(&self.form)
    }
}

/// Writes examples as `lemma<TAB>target_index<TAB>space-separated tokens`.
pub fn write_examples(examples: &[ContextualExample]) -> String {
    let mut out = String::new();
    for ex in examples {
        out.push_str(&ex.lemma);
        out.push('\t');
        out.push_str(&ex.target_index.to_string());
        out.push('\t');
        out.push_str(&ex.sentence.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_examples(text: &str) -> Result<Vec<ContextualExample>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.splitn(3, '\t').collect();
        if cols.len() != 3 {
            return Err(Error::parse(i + 1, "expected lemma<TAB>index<TAB>tokens"));
        }
        let index: usize = cols[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(i + 1, format!("bad target index {:?}", cols[1])))?;
        let sentence: Vec<String> = cols[2].split_whitespace().map(nfc).collect();
        let ex = ContextualExample::new(sentence, index, nfc(cols[0].trim()))
            .map_err(|e| Error::parse(i + 1, e.to_string()))?;
        out.push(ex);
    }
    Ok(out)
}
