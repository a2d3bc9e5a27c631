/**
 * Secure-note flow: compress, encrypt under a fresh 256-bit key, replicate
 * the ciphertext, and split the key into per-node shares - all before any
 * request leaves the page. Reading collects the ciphertext (majority
 * replica check on the hash) and enough key shares to interpolate.
 */

import { aeadDecrypt, aeadEncrypt, compress, decompress, randomHex, randomKey } from './crypto.js';
import { hexOf, fromHex, reconstructBytes, shareBytes, utf8, utf8Decode } from './encoding.js';
import { BrowserSession, MAJORITY, ProtocolError } from './session.js';

const NOTE_CAP = 64 * 1024;

export async function createNote(session: BrowserSession, text: string, threshold = MAJORITY): Promise<string> {
	const raw = utf8(text);
	if (raw.length > NOTE_CAP) throw new ProtocolError('NoteTooLarge', `${raw.length} bytes`);
	const noteId = `note-${randomHex(8)}`;
	const key = randomKey();
	const ciphertext = hexOf(await aeadEncrypt(key, await compress(raw)));
	const perNode = shareBytes(key, threshold);
	await session.requestAll('NOTE_PUT', (node) => ({
		note_id: noteId,
		threshold,
		ciphertext,
		codec: 'zlib',
		chunks: perNode[node - 1],
	}));
	return noteId;
}

export async function readNote(session: BrowserSession, noteId: string): Promise<string> {
	const results = await session.requestEach('NOTE_GET', () => ({ note_id: noteId }));
	const good = new Map<number, { ciphertext: string; chunks: string[]; hash: string; threshold: number }>();
	for (const [node, r] of results) {
		if (!(r instanceof ProtocolError)) good.set(node, r as never);
	}
	if (good.size === 0) throw [...results.values()].find((r) => r instanceof ProtocolError) as ProtocolError;
	const threshold = Math.max(...[...good.values()].map((r) => r.threshold));
	if (good.size < threshold) throw new ProtocolError('NodeUnreachable', `${good.size} of ${threshold} shares`);
	const hashes = [...good.values()].map((r) => r.hash);
	const majorityHash = hashes.sort().reduce(
		(best, h) => (hashes.filter((x) => x === h).length > hashes.filter((x) => x === best).length ? h : best));
	if (hashes.filter((h) => h === majorityHash).length < MAJORITY) {
		throw new ProtocolError('ReplicaMismatch', 'no majority ciphertext replica');
	}
	const source = [...good.values()].find((r) => r.hash === majorityHash)!;
	const perNode = new Map<number, string[]>();
	for (const [node, r] of good) perNode.set(node, r.chunks);
	const key = reconstructBytes(perNode, threshold, 32);
	const plain = await decompress(await aeadDecrypt(key, fromHex(source.ciphertext)));
	return utf8Decode(plain);
}

export async function updateNote(session: BrowserSession, noteId: string, text: string): Promise<void> {
	const current = (await session.request(1, 'NOTE_GET', { note_id: noteId })) as { threshold: number };
	const raw = utf8(text);
	if (raw.length > NOTE_CAP) throw new ProtocolError('NoteTooLarge', `${raw.length} bytes`);
	const key = randomKey();
	const ciphertext = hexOf(await aeadEncrypt(key, await compress(raw)));
	const perNode = shareBytes(key, current.threshold);
	await session.requestAll('NOTE_PUT', (node) => ({
		note_id: noteId,
		threshold: current.threshold,
		ciphertext,
		codec: 'zlib',
		chunks: perNode[node - 1],
	}));
}
