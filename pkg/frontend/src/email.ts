/**
 * Private-mail flow: the body is sealed to the recipient's public key, the
 * ciphertext is secret-shared at the majority threshold, and each node
 * stores one share stream plus an inbox entry. Fetching reverses it with
 * the reader's own key; single nodes never hold a whole message.
 */

import { seal, unseal, randomHex } from './crypto.js';
import { fromHex, reconstructBytes, shareBytes, utf8, utf8Decode } from './encoding.js';
import { BrowserSession, MAJORITY, ProtocolError } from './session.js';

const EMAIL_CAP = 256 * 1024;

export async function composeEmail(session: BrowserSession, recipient: string, body: string): Promise<string> {
	const raw = utf8(body);
	if (raw.length > EMAIL_CAP) throw new ProtocolError('NoteTooLarge', `${raw.length} bytes`);
	// majority-consistent registry read for the recipient key
	const entries = await session.requestEach('REGISTRY_GET', () => ({ user: recipient }));
	const docs = [...entries.values()].filter((r): r is Record<string, unknown> => !(r instanceof ProtocolError));
	const byKey = new Map<string, number>();
	for (const d of docs) byKey.set(String(d.enc_pk), (byKey.get(String(d.enc_pk)) ?? 0) + 1);
	const sorted = [...byKey.entries()].sort((a, b) => b[1] - a[1]);
	if (!sorted.length || sorted[0][1] < MAJORITY) {
		throw new ProtocolError('RegistryInconsistent', `no majority key for ${recipient}`);
	}
	const sealed = await seal(fromHex(sorted[0][0]), raw);
	const emailId = `mail-${randomHex(8)}`;
	const perNode = shareBytes(sealed, MAJORITY);
	await session.requestAll('EMAIL_PUT', (node) => ({
		email_id: emailId,
		recipient: `u:${recipient}`,
		chunks: perNode[node - 1],
		length: sealed.length,
	}));
	return emailId;
}

export interface InboxMessage {
	emailId: string;
	sender: string;
	body: string;
}

export async function fetchInbox(session: BrowserSession): Promise<InboxMessage[]> {
	const listings = await session.requestEach('EMAIL_LIST', () => ({}));
	const inbox = new Map<string, { email_id: string; sender: string; length: number }>();
	for (const r of listings.values()) {
		if (r instanceof ProtocolError) continue;
		for (const entry of (r as { inbox: { email_id: string; sender: string; length: number }[] }).inbox) {
			inbox.set(entry.email_id, entry);
		}
	}
	const out: InboxMessage[] = [];
	for (const entry of [...inbox.values()].sort((a, b) => a.email_id.localeCompare(b.email_id))) {
		const results = await session.requestEach('EMAIL_GET', () => ({ email_id: entry.email_id }));
		const perNode = new Map<number, string[]>();
		for (const [node, r] of results) {
			if (!(r instanceof ProtocolError)) perNode.set(node, (r as { chunks: string[] }).chunks);
		}
		if (perNode.size < MAJORITY) throw new ProtocolError('NodeUnreachable', `${perNode.size} share streams`);
		const sealed = reconstructBytes(perNode, MAJORITY, entry.length);
		const body = await unseal(session.boxKey, fromHex(session.creds.enc_pk), sealed);
		out.push({ emailId: entry.email_id, sender: entry.sender, body: utf8Decode(body) });
	}
	return out;
}
