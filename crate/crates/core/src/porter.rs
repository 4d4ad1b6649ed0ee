//! The Porter (1980) suffix-stripping stemmer, as originally published.
//!
//! None of the later refinements are applied: `-abli` (not `-bli`) maps to
//! `-able`, there is no `-logi` rule, step 1c turns any `y` after a vowel-bearing
//! stem into `i`, and words of one or two letters are stemmed like any other.
//! Characters outside `a-z` are treated as consonants.

struct Word {
    chars: Vec<char>,
}

impl Word {
    fn is_consonant(&self, i: usize) -> bool {
        match self.chars[i] {
            'a' | 'e' | 'i' | 'o' | 'u' => false,
            'y' => {
                // A `y` is a consonant exactly when an even number of `y`s
                // separates it from the nearest consonant (or word start).
                let mut j = i;
                let mut flip = false;
                while j > 0 && self.chars[j] == 'y' {
                    flip = !flip;
                    j -= 1;
                }
                !matches!(self.chars[j], 'a' | 'e' | 'i' | 'o' | 'u') != flip
            }
            _ => true,
        }
    }

    /// Number of VC sequences in the first `len` characters.
    fn measure(&self, len: usize) -> usize {
        let mut m = 0;
        let mut prev_vowel = false;
        let mut prev_cons = true;
        for i in 0..len {
            let cons = match self.chars[i] {
                'a' | 'e' | 'i' | 'o' | 'u' => false,
                'y' => i == 0 || !prev_cons,
                _ => true,
            };
            if cons && prev_vowel {
                m += 1;
            }
            prev_vowel = !cons;
            prev_cons = cons;
        }
        m
    }

    fn has_vowel(&self, len: usize) -> bool {
        let mut prev_cons = true;
        for i in 0..len {
            let cons = match self.chars[i] {
                'a' | 'e' | 'i' | 'o' | 'u' => false,
                'y' => i == 0 || !prev_cons,
                _ => true,
            };
            if !cons {
                return true;
            }
            prev_cons = cons;
        }
        false
    }

    fn ends_double_consonant(&self, len: usize) -> bool {
        len >= 2 && self.chars[len - 1] == self.chars[len - 2] && self.is_consonant(len - 1)
    }

    /// `*o`: stem ends consonant-vowel-consonant, last not w, x or y.
    fn ends_cvc(&self, len: usize) -> bool {
        len >= 3
            && self.is_consonant(len - 3)
            && !self.is_consonant(len - 2)
            && self.is_consonant(len - 1)
            && !matches!(self.chars[len - 1], 'w' | 'x' | 'y')
    }

    fn ends_with(&self, suffix: &str) -> bool {
        let n = suffix.chars().count();
        n <= self.chars.len() && self.chars[self.chars.len() - n..].iter().copied().eq(suffix.chars())
    }

    fn replace_suffix(&mut self, suffix: &str, replacement: &str) {
        let n = suffix.chars().count();
        self.chars.truncate(self.chars.len() - n);
        self.chars.extend(replacement.chars());
    }

    fn stem_len(&self, suffix: &str) -> usize {
        self.chars.len() - suffix.chars().count()
    }

    /// Applies the first rule whose suffix matches; a failed condition
    /// ends the step.
    fn apply(&mut self, rules: &[(&str, &str)], min_measure: usize) {
        for &(suffix, replacement) in rules {
            if self.ends_with(suffix) {
                if self.measure(self.stem_len(suffix)) >= min_measure {
                    self.replace_suffix(suffix, replacement);
                }
                return;
            }
        }
    }

    fn step1a(&mut self) {
        for (suffix, replacement) in [("sses", "ss"), ("ies", "i"), ("ss", "ss"), ("s", "")] {
            if self.ends_with(suffix) {
                self.replace_suffix(suffix, replacement);
                return;
            }
        }
    }

    fn step1b(&mut self) {
        if self.ends_with("eed") {
            if self.measure(self.stem_len("eed")) > 0 {
                self.replace_suffix("eed", "ee");
            }
            return;
        }
        let removed = ["ed", "ing"]
            .into_iter()
            .find(|s| self.ends_with(s) && self.has_vowel(self.stem_len(s)));
        let Some(suffix) = removed else { return };
        self.replace_suffix(suffix, "");

        for (end, replacement) in [("at", "ate"), ("bl", "ble"), ("iz", "ize")] {
            if self.ends_with(end) {
                self.replace_suffix(end, replacement);
                return;
            }
        }
        let len = self.chars.len();
        if self.ends_double_consonant(len) {
            if !matches!(self.chars[len - 1], 'l' | 's' | 'z') {
                self.chars.pop();
            }
        } else if self.measure(len) == 1 && self.ends_cvc(len) {
            self.chars.push('e');
        }
    }

    fn step1c(&mut self) {
        if self.ends_with("y") && self.has_vowel(self.chars.len() - 1) {
            self.replace_suffix("y", "i");
        }
    }

    fn step2(&mut self) {
        self.apply(
            &[
                ("ational", "ate"),
                ("tional", "tion"),
                ("enci", "ence"),
                ("anci", "ance"),
                ("izer", "ize"),
                ("abli", "able"),
                ("alli", "al"),
                ("entli", "ent"),
                ("eli", "e"),
                ("ousli", "ous"),
                ("ization", "ize"),
                ("ation", "ate"),
                ("ator", "ate"),
                ("alism", "al"),
                ("iveness", "ive"),
                ("fulness", "ful"),
                ("ousness", "ous"),
                ("aliti", "al"),
                ("iviti", "ive"),
                ("biliti", "ble"),
            ],
            1,
        );
    }

    fn step3(&mut self) {
        self.apply(
            &[
                ("icate", "ic"),
                ("ative", ""),
                ("alize", "al"),
                ("iciti", "ic"),
                ("ical", "ic"),
                ("ful", ""),
                ("ness", ""),
            ],
            1,
        );
    }

    fn step4(&mut self) {
        const SUFFIXES: [&str; 19] = [
            "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ion", "ou", "ism", "ate",
            "iti", "ous", "ive", "ize",
        ];
        for suffix in SUFFIXES {
            if self.ends_with(suffix) {
                let len = self.stem_len(suffix);
                let st = suffix != "ion" || (len > 0 && matches!(self.chars[len - 1], 's' | 't'));
                if st && self.measure(len) > 1 {
                    self.chars.truncate(len);
                }
                return;
            }
        }
    }

    fn step5(&mut self) {
        if self.ends_with("e") {
            let len = self.chars.len() - 1;
            let m = self.measure(len);
            if m > 1 || (m == 1 && !self.ends_cvc(len)) {
                self.chars.truncate(len);
            }
        }
        if self.ends_with("ll") && self.measure(self.chars.len() - 1) > 1 {
            self.chars.pop();
        }
    }
}

/// Stems one word. Input is lowercased first.
pub fn stem(word: &str) -> String {
    let mut w = Word {
        chars: word.to_lowercase().chars().collect(),
    };
    w.step1a();
    w.step1b();
    w.step1c();
    w.step2();
    w.step3();
    w.step4();
    w.step5();
    w.chars.into_iter().collect()
}
