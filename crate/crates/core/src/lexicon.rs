//! Object vocabulary: the ten detector classes and the surface forms that
//! name them in speech.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Identifier of a detector/lexicon object class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub u8);

impl ClassId {
    pub const LAPTOP: ClassId = ClassId(0);
    pub const KEYBOARD: ClassId = ClassId(1);
    pub const MOUSE: ClassId = ClassId(2);
    pub const MONITOR: ClassId = ClassId(3);
    pub const MOBILE_PHONE: ClassId = ClassId(4);
    pub const BOTTLE: ClassId = ClassId(5);
    pub const CUP: ClassId = ClassId(6);
    pub const PEN: ClassId = ClassId(7);
    pub const BOOK: ClassId = ClassId(8);
    pub const HAND: ClassId = ClassId(9);
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match lexicon().class(*self) {
            Some(c) => f.write_str(&c.canonical_name),
            None => write!(f, "class#{}", self.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Multiplicity {
    Singular,
    Plural,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectClass {
    pub id: ClassId,
    pub canonical_name: String,
    /// Singular surface forms, canonical name first. Multi-word forms are
    /// space separated.
    pub synonyms: Vec<String>,
    /// Plural surface forms.
    pub plurals: Vec<String>,
}

/// Hash table from surface form to class id.
#[derive(Debug)]
pub struct Lexicon {
    classes: Vec<ObjectClass>,
    forms: HashMap<String, (ClassId, Multiplicity)>,
    max_words: usize,
}

const BUILTIN: &[(&str, &[&str], &[&str])] = &[
    ("laptop", &["laptop", "laptop computer"], &["laptops", "laptop computers"]),
    ("keyboard", &["keyboard"], &["keyboards"]),
    ("mouse", &["mouse", "computer mouse"], &["mice", "computer mice"]),
    ("monitor", &["monitor", "screen", "display"], &["monitors", "screens", "displays"]),
    (
        "mobile phone",
        &["mobile phone", "smart phone", "smartphone", "phone", "cellphone", "cell phone"],
        &["mobile phones", "smart phones", "smartphones", "phones", "cellphones", "cell phones"],
    ),
    ("bottle", &["bottle", "water bottle"], &["bottles", "water bottles"]),
    ("cup", &["cup", "mug"], &["cups", "mugs"]),
    ("pen", &["pen"], &["pens"]),
    ("book", &["book", "textbook"], &["books", "textbooks"]),
    ("hand", &["hand"], &["hands"]),
];

const NUMERALS: &[(&str, u32)] = &[
    ("one", 1),
    ("two", 2),
    ("three", 3),
    ("four", 4),
    ("five", 5),
    ("six", 6),
    ("seven", 7),
    ("eight", 8),
    ("nine", 9),
    ("ten", 10),
];

impl Lexicon {
    pub fn builtin() -> Self {
        let classes = BUILTIN
            .iter()
            .enumerate()
            .map(|(i, (name, syn, plu))| ObjectClass {
                id: ClassId(i as u8),
                canonical_name: name.to_string(),
                synonyms: syn.iter().map(|s| s.to_string()).collect(),
                plurals: plu.iter().map(|s| s.to_string()).collect(),
            })
            .collect();
        Self::from_classes(classes)
    }

    /// Builds the lookup table. Panics if a surface form is claimed by two
    /// classes, since synonym sets must be disjoint.
    pub fn from_classes(classes: Vec<ObjectClass>) -> Self {
        let mut forms = HashMap::new();
        let mut max_words = 1;
        for class in &classes {
            let tagged = class
                .synonyms
                .iter()
                .map(|s| (s, Multiplicity::Singular))
                .chain(class.plurals.iter().map(|s| (s, Multiplicity::Plural)));
            for (form, mult) in tagged {
                max_words = max_words.max(form.split(' ').count());
                if let Some((other, _)) = forms.insert(form.clone(), (class.id, mult)) {
                    panic!("surface form `{form}` claimed by classes {} and {}", other.0, class.id.0);
                }
            }
        }
        Self { classes, forms, max_words }
    }

    pub fn classes(&self) -> &[ObjectClass] {
        &self.classes
    }

    pub fn class(&self, id: ClassId) -> Option<&ObjectClass> {
        self.classes.iter().find(|c| c.id == id)
    }

    pub fn id_of(&self, name: &str) -> Option<ClassId> {
        self.forms.get(name).map(|(id, _)| *id)
    }

    pub fn canonical(&self, id: ClassId) -> Option<&str> {
        self.class(id).map(|c| c.canonical_name.as_str())
    }

    /// First object mention in a lowercased token list, with its multiplicity.
    ///
    /// Longer surface forms win at a given position ("smart phone" before
    /// "phone"). A mention is plural when its surface form is plural or one
    /// of the two preceding tokens is "all", "these" or a numeral above one.
    pub fn lookup<S: AsRef<str>>(&self, transcript: &[S]) -> Option<(ClassId, Multiplicity)> {
        let tokens: Vec<&str> = transcript.iter().map(|s| s.as_ref()).collect();
        for start in 0..tokens.len() {
            for len in (1..=self.max_words.min(tokens.len() - start)).rev() {
                let form = tokens[start..start + len].join(" ");
                if let Some(&(id, mult)) = self.forms.get(&form) {
                    let quantified = tokens[start.saturating_sub(2)..start].iter().any(|t| plural_quantifier(t));
                    let mult = if quantified { Multiplicity::Plural } else { mult };
                    return Some((id, mult));
                }
            }
        }
        None
    }
}

fn plural_quantifier(token: &str) -> bool {
    if token == "all" || token == "these" {
        return true;
    }
    if let Ok(n) = token.parse::<u32>() {
        return n > 1;
    }
    NUMERALS.iter().any(|(w, n)| *w == token && *n > 1)
}

/// Process-wide built-in lexicon.
pub fn lexicon() -> &'static Lexicon {
    static LEXICON: OnceLock<Lexicon> = OnceLock::new();
    LEXICON.get_or_init(Lexicon::builtin)
}

/// Looks up the first object mention using the built-in lexicon.
pub fn lexicon_lookup<S: AsRef<str>>(transcript: &[S]) -> Option<(ClassId, Multiplicity)> {
    lexicon().lookup(transcript)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smart_phone_is_a_mobile_phone() {
        assert_eq!(
            lexicon_lookup(&["describe", "the", "smart", "phone"]),
            Some((ClassId::MOBILE_PHONE, Multiplicity::Singular))
        );
    }

    #[test]
    fn plural_surface_form() {
        assert_eq!(lexicon_lookup(&["locate", "books"]), Some((ClassId::BOOK, Multiplicity::Plural)));
    }

    #[test]
    fn no_object_word() {
        assert_eq!(lexicon_lookup(&["zoom", "in"]), None);
        assert_eq!(lexicon_lookup::<&str>(&[]), None);
    }

    #[test]
    fn quantifiers_make_plural() {
        assert_eq!(lexicon_lookup(&["find", "two", "cup"]), Some((ClassId::CUP, Multiplicity::Plural)));
        assert_eq!(lexicon_lookup(&["show", "all", "the", "pen"]), Some((ClassId::PEN, Multiplicity::Plural)));
        assert_eq!(lexicon_lookup(&["what", "are", "these", "mug"]), Some((ClassId::CUP, Multiplicity::Plural)));
        assert_eq!(lexicon_lookup(&["find", "3", "bottle"]), Some((ClassId::BOTTLE, Multiplicity::Plural)));
        assert_eq!(lexicon_lookup(&["find", "one", "bottle"]), Some((ClassId::BOTTLE, Multiplicity::Singular)));
        assert_eq!(lexicon_lookup(&["find", "1", "bottle"]), Some((ClassId::BOTTLE, Multiplicity::Singular)));
    }

    #[test]
    fn first_mention_wins() {
        assert_eq!(
            lexicon_lookup(&["put", "the", "pen", "near", "the", "laptop"]),
            Some((ClassId::PEN, Multiplicity::Singular))
        );
    }

    #[test]
    fn ten_classes_with_disjoint_synonyms() {
        let lex = lexicon();
        assert_eq!(lex.classes().len(), 10);
        let mut seen = std::collections::HashSet::new();
        for class in lex.classes() {
            assert!(seen.insert(class.id), "duplicate id");
            for form in class.synonyms.iter().chain(&class.plurals) {
                assert_eq!(lex.id_of(form), Some(class.id), "{form}");
            }
            // canonical -> id -> canonical
            assert_eq!(lex.canonical(lex.id_of(&class.canonical_name).unwrap()), Some(class.canonical_name.as_str()));
        }
    }

    #[test]
    #[should_panic(expected = "claimed by classes")]
    fn overlapping_synonyms_rejected() {
        Lexicon::from_classes(vec![
            ObjectClass { id: ClassId(0), canonical_name: "a".into(), synonyms: vec!["x".into()], plurals: vec![] },
            ObjectClass { id: ClassId(1), canonical_name: "b".into(), synonyms: vec!["x".into()], plurals: vec![] },
        ]);
    }
}
