//! Rule-based sentence splitting.

/// Lowercased words that end in a period without ending a sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "ft", "vs", "etc", "inc", "ltd",
    "co", "corp", "no", "vol", "gen", "col", "lt", "sgt", "capt", "gov", "sen", "rep", "rev",
    "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec", "e.g",
    "i.e", "u.s", "u.k", "approx", "est", "dept", "univ", "ave", "blvd",
];

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

/// The word (letters and inner periods) ending right before byte `end`.
fn word_before(text: &str, end: usize) -> &str {
    let head = &text[..end];
    let start = head
        .char_indices()
        .rev()
        .find(|&(_, c)| !(c.is_alphanumeric() || c == '.'))
        .map_or(0, |(i, c)| i + c.len_utf8());
    &head[start..]
}

fn is_abbreviation(word: &str) -> bool {
    let lowered = word.to_lowercase();
    if ABBREVIATIONS.contains(&lowered.as_str()) {
        return true;
    }
    // Initials such as "J." or "D.C".
    let mut chars = word.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if c.is_uppercase())
        || (word.contains('.') && word.split('.').all(|p| p.chars().count() <= 1))
}

/// Splits `text` into trimmed, non-empty sentences.
///
/// A sentence ends at `.`, `!` or `?` (plus any closing quotes or
/// brackets) followed by whitespace, unless the next word starts in lower
/// case or the period closes a known abbreviation or an initial.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !matches!(c, '.' | '!' | '?') {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && (matches!(chars[j].1, '.' | '!' | '?') || is_closer(chars[j].1)) {
            j += 1;
        }
        let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
        let at_end = j == chars.len();
        let followed_by_space = !at_end && chars[j].1.is_whitespace();
        if !at_end && !followed_by_space {
            i = j;
            continue;
        }
        let next_word = chars[j..]
            .iter()
            .map(|&(_, c)| c)
            .find(|c| !c.is_whitespace());
        let lower_next = next_word.is_some_and(|c| c.is_lowercase());
        let abbreviation = c == '.' && is_abbreviation(word_before(text, pos));
        if at_end || !(lower_next || abbreviation) {
            push_trimmed(&mut out, &text[start..end]);
            start = end;
        }
        i = j;
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let s = s.split_whitespace().collect::<Vec<_>>().join(" ");
    if !s.is_empty() {
        out.push(s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_terminal_punctuation() {
        assert_eq!(
            split_sentences(
                "Walter Jerry Payton was an American football player. He played for Chicago."
            ),
            vec![
                "Walter Jerry Payton was an American football player.",
                "He played for Chicago."
            ]
        );
    }

    #[test]
    fn guards_abbreviations_and_initials() {
        assert_eq!(
            split_sentences("Dr. Smith met J. R. Tolkien in Washington D.C. today. Really?  Yes!"),
            vec!["Dr. Smith met J. R. Tolkien in Washington D.C. today.", "Really?", "Yes!"]
        );
        assert_eq!(split_sentences("It cost 3.5 dollars. Fine"), vec!["It cost 3.5 dollars.", "Fine"]);
    }

    #[test]
    fn empty_and_unterminated() {
        assert!(split_sentences("   ").is_empty());
        assert_eq!(split_sentences("no terminal"), vec!["no terminal"]);
        assert_eq!(split_sentences("He said \"stop.\" Then left."), vec!["He said \"stop.\"", "Then left."]);
    }
}
