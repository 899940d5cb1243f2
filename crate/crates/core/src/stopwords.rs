//! Built-in English stopword list, shared by keyword candidate filtering and
//! the optional ROUGE stopword-removal switch. Callers can supply their own
//! list (one token per line) instead.

use std::collections::HashSet;
use std::sync::OnceLock;

/// A compact general-English list: articles, pronouns, prepositions,
/// conjunctions, auxiliaries, and a few high-frequency adverbs.
pub const DEFAULT_STOPWORDS: &str = "\
a about above after again against all am an and any are aren't as at be \
because been before being below between both but by can cannot could \
couldn't did didn't do does doesn't doing don't down during each few for \
from further had hadn't has hasn't have haven't having he he'd he'll he's \
her here here's hers herself him himself his how how's i i'd i'll i'm i've \
if in into is isn't it it's its itself let's me more most mustn't my myself \
no nor not of off on once only or other ought our ours ourselves out over \
own same shan't she she'd she'll she's should shouldn't so some such than \
that that's the their theirs them themselves then there there's these they \
they'd they'll they're they've this those through to too under until up \
very was wasn't we we'd we'll we're we've were weren't what what's when \
when's where where's which while who who's whom why why's will with won't \
would wouldn't you you'd you'll you're you've your yours yourself yourselves";

/// Parse a stopword list in the external file format: whitespace-separated
/// tokens (one per line in files; the embedded default uses spaces).
pub fn parse_stopwords(text: &str) -> HashSet<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// The embedded default list as a shared set.
pub fn default_stopwords() -> &'static HashSet<String> {
    static SET: OnceLock<HashSet<String>> = OnceLock::new();
    SET.get_or_init(|| parse_stopwords(DEFAULT_STOPWORDS))
}
