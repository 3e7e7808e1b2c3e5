import { ApiClient } from "./api.js";
import { LocalizeView } from "./localize_view.js";
import { SearchView } from "./search_view.js";

async function boot(): Promise<void> {
  const api = new ApiClient();
  const meta = await api.meta();

  const searchRoot = document.getElementById("search-view") as HTMLElement;
  const localizeRoot = document.getElementById(
    "localize-view",
  ) as HTMLElement;
  const searchView = new SearchView(searchRoot, api, meta);
  new LocalizeView(localizeRoot, api, meta);

  const info = document.getElementById("meta-line");
  if (info) {
    info.textContent =
      `${meta.count} motions (${meta.split ?? "?"} split), ` +
      `${meta.d}-d embeddings, ${meta.fps} fps`;
  }

  for (const tab of document.querySelectorAll<HTMLElement>("[data-tab]")) {
    tab.addEventListener("click", () => {
      for (const view of [searchRoot, localizeRoot]) view.hidden = true;
      const target = document.getElementById(tab.dataset.tab as string);
      if (target) target.hidden = false;
      for (const p of searchView.players) p.pause();
    });
  }
}

void boot();
