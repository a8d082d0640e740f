//! Single-pass `{placeholder}` substitution.
//!
//! Only the template itself is scanned: substituted values are never
//! re-examined, so task content that happens to contain a placeholder
//! token cannot hijack a later substitution. Unknown `{tokens}` and bare
//! braces pass through untouched, which keeps user template overrides
//! free to use braces for their own purposes.

pub(crate) fn fill_placeholders(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open..];
        let replaced = after.find('}').and_then(|close| {
            let token = &after[1..close];
            vars.iter()
                .find(|(name, _)| *name == token)
                .map(|(_, value)| (value, close))
        });
        match replaced {
            Some((value, close)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = &after[1..];
            }
        }
    }
    out.push_str(rest);
    out
}
