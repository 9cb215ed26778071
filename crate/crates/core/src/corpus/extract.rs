//! HTML extraction for archive listing pages and article pages.

use regex::Regex;
use scraper::{ElementRef, Html, Node, Selector};
use url::Url;

const SKIPPED_ELEMENTS: [&str; 5] = ["script", "style", "nav", "noscript", "template"];

fn is_skipped(name: &str) -> bool {
    SKIPPED_ELEMENTS.iter().any(|s| s.eq_ignore_ascii_case(name))
}

/// Returns the absolute article links on an archive page that match
/// `article_pattern`, in document order, without duplicates.
pub fn extract_links(html: &str, page_url: &Url, article_pattern: &Regex) -> Vec<Url> {
    let doc = Html::parse_document(html);
    let anchors = Selector::parse("a[href]").expect("static selector");
    let mut out: Vec<Url> = Vec::new();
    for a in doc.select(&anchors) {
        let Some(href) = a.value().attr("href") else {
            continue;
        };
        let Ok(mut url) = page_url.join(href.trim()) else {
            continue;
        };
        url.set_fragment(None);
        if !matches!(url.scheme(), "http" | "https") || !article_pattern.is_match(url.as_str()) {
            continue;
        }
        if !out.contains(&url) {
            out.push(url);
        }
    }
    out
}

fn collect_text(el: ElementRef<'_>, buf: &mut String) {
    for child in el.children() {
        match child.value() {
            Node::Text(t) => buf.push_str(t),
            Node::Element(e) if !is_skipped(e.name()) => {
                if let Some(child_el) = ElementRef::wrap(child) {
                    collect_text(child_el, buf);
                }
            }
            _ => {}
        }
    }
}

fn squash_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn inside_skipped(el: ElementRef<'_>, container: ElementRef<'_>) -> bool {
    for anc in el.ancestors() {
        if anc.id() == container.id() {
            return false;
        }
        if let Node::Element(e) = anc.value() {
            if is_skipped(e.name()) {
                return true;
            }
        }
    }
    false
}

/// Extracts `(headline, body)` from an article page.
///
/// The headline is the first `h1`, falling back to `<title>`. The body is the
/// text of the paragraph elements inside the first element matching
/// `container_selector` (the whole document when nothing matches), with
/// script, style and navigation content removed. When the container has no
/// paragraphs its remaining text is used instead.
pub fn extract_article(html: &str, container_selector: &Selector) -> (String, String) {
    let doc = Html::parse_document(html);
    let h1 = Selector::parse("h1").expect("static selector");
    let title = Selector::parse("title").expect("static selector");
    let p = Selector::parse("p").expect("static selector");

    let headline = doc
        .select(&h1)
        .next()
        .or_else(|| doc.select(&title).next())
        .map(|el| {
            let mut s = String::new();
            collect_text(el, &mut s);
            squash_whitespace(&s)
        })
        .unwrap_or_default();

    let container = doc
        .select(container_selector)
        .next()
        .unwrap_or_else(|| doc.root_element());

    let mut paragraphs = Vec::new();
    for para in container.select(&p) {
        if inside_skipped(para, container) {
            continue;
        }
        let mut s = String::new();
        collect_text(para, &mut s);
        let s = squash_whitespace(&s);
        if !s.is_empty() {
            paragraphs.push(s);
        }
    }
    let body = if paragraphs.is_empty() {
        let mut s = String::new();
        collect_text(container, &mut s);
        squash_whitespace(&s)
    } else {
        paragraphs.join("\n")
    };
    (headline, body)
}
