//! Tool-call extraction from free-form model replies.
//!
//! A call is `name(arg1, arg2, ...)` where `name` is one of the names
//! the caller asks for, standing on an identifier boundary. Arguments
//! run to the matching close paren (nesting respected, newlines
//! allowed) and are split on top-level commas, trimmed, otherwise
//! verbatim. An unclosed paren is prose, not a call.

use crate::world::ToolCall;
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedCall {
    pub call: ToolCall,
    /// Byte range of the whole `name(...)` occurrence in the reply.
    pub span: (usize, usize),
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

/// Splits the inside of a call on commas not nested in parentheses.
fn split_top_level(args: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, c) in args.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                parts.push(args[start..i].trim().to_string());
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(args[start..].trim().to_string());
    parts
}

/// Finds every call to one of `names` in `reply`, in order of
/// appearance. Matches inside an earlier call's argument list are
/// skipped; names followed by an unclosed paren are ignored.
pub fn extract_tool_calls(reply: &str, names: &BTreeSet<String>) -> Vec<ExtractedCall> {
    let bytes = reply.as_bytes();

    // Candidate starts for each requested name, identifier-bounded.
    let mut candidates: Vec<(usize, &str)> = Vec::new();
    for name in names {
        let mut from = 0;
        while let Some(pos) = reply[from..].find(name.as_str()) {
            let start = from + pos;
            let end = start + name.len();
            let left_ok = start == 0 || !is_ident_char(bytes[start - 1]);
            let right_ok = end < bytes.len() && !is_ident_char(bytes[end]);
            if left_ok && right_ok {
                candidates.push((start, name.as_str()));
            }
            from = end;
        }
    }
    candidates.sort();

    let mut calls = Vec::new();
    let mut consumed_to = 0usize;
    for (start, name) in candidates {
        if start < consumed_to {
            continue;
        }
        let after = start + name.len();
        // Optional whitespace, then an opening paren, else it's prose.
        let open = match reply[after..].find(|c: char| !c.is_whitespace()) {
            Some(offset) if bytes[after + offset] == b'(' => after + offset,
            _ => continue,
        };
        let mut depth = 0usize;
        let mut close = None;
        for (i, c) in reply[open..].char_indices() {
            match c {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        close = Some(open + i);
                        break;
                    }
                }
                _ => {}
            }
        }
        let Some(close) = close else { continue };
        let inside = &reply[open + 1..close];
        let arguments = if inside.trim().is_empty() {
            Vec::new()
        } else {
            split_top_level(inside)
        };
        calls.push(ExtractedCall {
            call: ToolCall { name: name.to_string(), arguments },
            span: (start, close + 1),
        });
        consumed_to = close + 1;
    }
    calls
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(list: &[&str]) -> BTreeSet<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    fn args(call: &ExtractedCall) -> Vec<&str> {
        call.call.arguments.iter().map(String::as_str).collect()
    }

    #[test]
    fn extracts_the_appendix_example() {
        let set = names(&["flight_search"]);
        let calls = extract_tool_calls("flight_search(New York, London, 2022-10-01)", &set);
        assert_eq!(calls.len(), 1);
        assert_eq!(args(&calls[0]), vec!["New York", "London", "2022-10-01"]);
    }

    #[test]
    fn ignores_other_parentheticals() {
        let set = names(&["hotel_search"]);
        let calls = extract_tool_calls(
            "Let me check hotels (see above) with hotel_search(St. Louis) now.",
            &set,
        );
        assert_eq!(calls.len(), 1);
        assert_eq!(args(&calls[0]), vec!["St. Louis"]);
    }

    #[test]
    fn respects_identifier_boundaries() {
        let set = names(&["hotel_search"]);
        assert!(extract_tool_calls("my_hotel_search(Rome)", &set).is_empty());
        assert!(extract_tool_calls("hotel_searcher(Rome)", &set).is_empty());
    }

    #[test]
    fn unclosed_paren_is_prose() {
        let set = names(&["hotel_search"]);
        assert!(extract_tool_calls("hotel_search(Rome", &set).is_empty());
    }

    #[test]
    fn multiple_calls_come_back_in_order() {
        let set = names(&["flight_search"]);
        let text = "First flight_search(A, B, 2025-03-10), then flight_search(B, A, 2025-03-12).";
        let calls = extract_tool_calls(text, &set);
        assert_eq!(calls.len(), 2);
        assert_eq!(args(&calls[0])[0], "A");
        assert_eq!(args(&calls[1])[0], "B");
        assert!(calls[0].span.1 <= calls[1].span.0);
    }

    #[test]
    fn nested_parens_stay_inside_one_argument()  {
        let set = names(&["hotel_search"]);
        let calls = extract_tool_calls("hotel_search(Paris (France))", &set);
        assert_eq!(calls.len(), 1);
        assert_eq!(args(&calls[0]), vec!["Paris (France)"]);
    }

    #[test]
    fn empty_argument_list_is_zero_args() {
        let set = names(&["hotel_search"]);
        let calls = extract_tool_calls("hotel_search()", &set);
        assert_eq!(calls.len(), 1);
        assert!(calls[0].call.arguments.is_empty());
    }
}
