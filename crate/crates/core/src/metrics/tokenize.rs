/// Lowercases, drops `. , ; :` and splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .filter(|c| !matches!(c, '.' | ',' | ';' | ':'))
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}
