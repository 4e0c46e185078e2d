use alloc::string::String;

use super::Program;

/// Double-quotes a constant, escaping `"`, `\` and control characters.
pub fn quote_constant(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Renders rules (in order) followed by exceptions, one clause per line.
pub fn render_program(program: &Program) -> String {
    use core::fmt::Write;
    let mut out = String::new();
    for rule in &program.rules {
        let _ = writeln!(out, "{rule}");
    }
    for exc in &program.exceptions {
        let _ = writeln!(out, "{exc}");
    }
    out
}
