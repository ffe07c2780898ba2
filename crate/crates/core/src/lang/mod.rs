//! Lexing, vocabulary and compile validation for the generated surface syntax.

mod lexer;
mod parser;
mod vocab;

pub use lexer::{
    is_keyword, render, tokenize, tokenize_lenient, LexError, Token, TokenKind, DEDENT_TEXT, INDENT_TEXT,
    NEWLINE_TEXT,
};
pub use parser::{validate, CompileError, CompileVerdict};
pub use vocab::{load_vocab, save_vocab, TokenId, TokenVocab, VocabError, PAD_ID, UNK_KEY};
