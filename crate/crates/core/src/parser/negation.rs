use super::{question_tokens, Lexicons};

/// True iff a negation marker occurs as a token. Apostrophes are removed
/// from both sides before matching, so "isnt" matches "isn't".
pub fn detect_negation(raw: &str, lex: &Lexicons) -> bool {
    let tokens = question_tokens(raw);
    lex.negation_markers
        .iter()
        .flat_map(|m| question_tokens(m))
        .any(|m| tokens.contains(&m))
}
