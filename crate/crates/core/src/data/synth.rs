//! Templated synthetic corpus: subject–verb–object sentences with optional
//! adjectives, adverbs, and prepositional phrases, drawn from a fixed
//! ~500-word lexicon.  Exists so training and evaluation tests run offline
//! with a corpus whose statistics are known and reproducible from a seed.

use crate::rng::Rng;

const DETERMINERS: &[&str] = &["the", "a", "every", "some", "this", "that", "each", "another"];

const ADJECTIVES: &[&str] = &[
    "old", "young", "big", "small", "tall", "short", "long", "wide", "narrow", "deep",
    "heavy", "bright", "dark", "pale", "red", "blue", "green", "yellow", "white", "black",
    "brown", "grey", "golden", "silver", "quiet", "loud", "gentle", "fierce", "brave", "timid",
    "clever", "foolish", "wise", "kind", "cruel", "proud", "humble", "happy", "sad", "angry",
    "calm", "tired", "eager", "lazy", "busy", "idle", "rich", "poor", "strange", "familiar",
    "ancient", "modern", "new", "fresh", "stale", "sweet", "bitter", "sour", "salty", "warm",
    "cold", "cool", "hot", "dry", "wet", "damp", "dusty", "clean", "dirty", "smooth",
    "rough", "soft", "hard", "sharp", "blunt", "round", "square", "crooked", "straight", "empty",
    "full", "open", "closed", "broken", "mended", "hidden", "visible", "distant", "nearby", "silent",
    "noisy", "swift", "slow", "sturdy", "fragile", "mighty", "feeble", "hollow", "solid", "curious",
    "careful", "careless", "graceful", "clumsy", "patient", "restless", "cheerful", "gloomy", "lonely", "crowded",
    "peaceful", "wild", "tame", "hungry", "thirsty", "sleepy", "watchful",
];

const NOUNS: &[&str] = &[
    "cat", "dog", "bird", "fish", "horse", "bear", "wolf", "fox", "rabbit", "mouse",
    "lion", "tiger", "whale", "shark", "eagle", "owl", "snake", "frog", "deer", "goat",
    "sheep", "cow", "pig", "duck", "goose", "crow", "spider", "ant", "bee", "moth",
    "child", "farmer", "doctor", "teacher", "sailor", "soldier", "painter", "singer", "dancer", "writer",
    "baker", "hunter", "guard", "king", "queen", "prince", "knight", "wizard", "giant", "stranger",
    "neighbor", "friend", "brother", "sister", "captain", "pilot", "nurse", "judge", "thief", "merchant",
    "tree", "flower", "stone", "river", "mountain", "valley", "forest", "field", "garden", "bridge",
    "tower", "castle", "house", "cottage", "barn", "mill", "road", "path", "gate", "wall",
    "window", "door", "roof", "cellar", "attic", "kitchen", "table", "chair", "bed", "lamp",
    "candle", "mirror", "clock", "book", "letter", "map", "coin", "ring", "sword", "shield",
    "crown", "basket", "bottle", "cup", "plate", "knife", "spoon", "rope", "ladder", "wheel",
    "cart", "boat", "ship", "train", "wagon", "bell", "drum", "flute", "violin", "painting",
    "statue", "fountain", "market", "village", "city", "harbor", "island", "shore", "cliff", "cave",
    "meadow", "orchard", "vineyard", "well", "pond", "lake", "stream", "hill", "plain", "desert",
    "storm", "cloud", "wind", "rain", "snow", "fire", "shadow", "light", "moon", "star",
    "sun", "morning", "evening", "night", "winter", "summer", "spring", "autumn", "feast", "song",
    "story", "dream", "secret", "journey", "treasure", "lantern", "anchor", "compass", "banner", "garland",
];

const VERBS_TRANSITIVE: &[&str] = &[
    "chases", "finds", "watches", "carries", "holds", "lifts", "drops", "throws", "catches", "pushes",
    "pulls", "opens", "closes", "breaks", "mends", "builds", "paints", "draws", "writes", "reads",
    "cleans", "washes", "dries", "fills", "empties", "buries", "digs", "plants", "gathers", "picks",
    "cuts", "chops", "stirs", "cooks", "bakes", "eats", "drinks", "tastes", "smells", "touches",
    "hears", "sees", "notices", "remembers", "forgets", "knows", "learns", "teaches", "shows", "hides",
    "seeks", "follows", "leads", "guides", "guards", "protects", "defends", "attacks", "strikes", "shakes",
    "bends", "folds", "wraps", "ties", "unties", "hangs", "drags", "rolls", "spins", "turns",
    "flips", "tosses", "fetches", "brings", "takes", "gives", "sends", "receives", "borrows", "lends",
    "trades", "sells", "buys", "steals", "returns", "repairs", "admires",
];

const VERBS_INTRANSITIVE: &[&str] = &[
    "sleeps", "wakes", "walks", "runs", "jumps", "hops", "crawls", "swims", "flies", "floats",
    "sinks", "falls", "rises", "stands", "sits", "kneels", "leans", "rests", "waits", "stays",
    "arrives", "departs", "travels", "wanders", "roams", "marches", "dances", "sings", "hums", "whistles",
    "shouts", "whispers", "laughs", "cries", "smiles", "frowns", "sighs", "yawns", "shivers", "trembles",
    "stumbles", "slips", "dreams", "listens", "vanishes", "appears",
];

const ADVERBS: &[&str] = &[
    "quickly", "slowly", "quietly", "loudly", "gently", "fiercely", "bravely", "calmly", "eagerly", "lazily",
    "happily", "sadly", "angrily", "proudly", "humbly", "wisely", "foolishly", "kindly", "cruelly", "carefully",
    "carelessly", "gracefully", "clumsily", "patiently", "restlessly", "cheerfully", "gloomily", "silently", "swiftly", "steadily",
    "suddenly", "gradually", "finally", "often", "rarely", "always", "never", "sometimes", "usually", "again",
    "twice", "once", "soon", "nearly", "almost", "barely", "really", "truly", "certainly", "perhaps",
    "gladly", "warmly", "coldly", "brightly", "darkly", "softly", "sharply", "boldly", "meekly", "daily",
];

const PREPOSITIONS: &[&str] = &[
    "near", "under", "over", "behind", "beside", "beyond", "across", "along", "around", "above",
    "below", "inside", "outside", "toward",
];

/// Every word the generator can emit, category lists concatenated.
pub fn lexicon() -> Vec<&'static str> {
    let mut all = Vec::new();
    all.extend_from_slice(DETERMINERS);
    all.extend_from_slice(ADJECTIVES);
    all.extend_from_slice(NOUNS);
    all.extend_from_slice(VERBS_TRANSITIVE);
    all.extend_from_slice(VERBS_INTRANSITIVE);
    all.extend_from_slice(ADVERBS);
    all.extend_from_slice(PREPOSITIONS);
    all
}

fn pick<'a>(words: &[&'a str], rng: &mut Rng) -> &'a str {
    words[rng.below(words.len())]
}

fn noun_phrase(out: &mut Vec<&'static str>, rng: &mut Rng) {
    out.push(pick(DETERMINERS, rng));
    if rng.bernoulli(0.5) {
        out.push(pick(ADJECTIVES, rng));
        if rng.bernoulli(0.12) {
            out.push(pick(ADJECTIVES, rng));
        }
    }
    out.push(pick(NOUNS, rng));
}

fn prepositional_phrase(out: &mut Vec<&'static str>, rng: &mut Rng) {
    out.push(pick(PREPOSITIONS, rng));
    out.push(pick(DETERMINERS, rng));
    if rng.bernoulli(0.3) {
        out.push(pick(ADJECTIVES, rng));
    }
    out.push(pick(NOUNS, rng));
}

fn sentence(rng: &mut Rng) -> String {
    let mut words: Vec<&'static str> = Vec::with_capacity(14);
    noun_phrase(&mut words, rng);
    if rng.bernoulli(0.3) {
        words.push(pick(ADVERBS, rng));
    }
    if rng.bernoulli(0.7) {
        words.push(pick(VERBS_TRANSITIVE, rng));
        noun_phrase(&mut words, rng);
        if rng.bernoulli(0.25) {
            prepositional_phrase(&mut words, rng);
        }
    } else {
        words.push(pick(VERBS_INTRANSITIVE, rng));
        if rng.bernoulli(0.45) {
            prepositional_phrase(&mut words, rng);
        }
    }
    words.join(" ")
}

/// Draws `n` sentences from the template grammar.
pub fn synthesize_sentences(n: usize, rng: &mut Rng) -> Vec<String> {
    (0..n).map(|_| sentence(rng)).collect()
}

// ---------------------------------------------------------------------------
